# Copyright 2025 Google LLC
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Tests for the compare command."""

import json
from unittest import mock

from rdr_eval import coordinator
from rdr_eval import datasets
from rdr_eval import synthetic
from rdr_eval.cli import main
from rdr_eval.numerics import RngState
import pytest

FAST = ["--epochs", "2", "--batch-size", "16", "--hidden-widths", "4,4"]


def _run(capsys, *argv):
  with mock.patch.object(coordinator, "configure_logging"):
    code = main(list(argv))
  return code, json.loads(capsys.readouterr().out.splitlines()[-1])


@pytest.fixture(name="samples")
def fixture_samples(tmp_path):
  xp, xq = synthetic.sample(synthetic.Scenario.gauss_shift(2.0), 80, 80,
                            RngState(3))
  p, q = str(tmp_path / "p.csv"), str(tmp_path / "q.csv")
  datasets.write_dataset(p, xp)
  datasets.write_dataset(q, xq)
  return p, q


def test_compare_writes_all_outputs(samples, tmp_path, capsys):
  """Tests the compare pipeline end to end."""
  p, q = samples
  out = tmp_path / "cmp"
  code, envelope = _run(capsys, "compare", "--p", p, "--q", q, *FAST,
                        "--seed", "8", "--bins", "5", "--out-dir", str(out))
  assert code == 0
  assert sorted(f.name for f in out.iterdir()) == [
      "histogram.csv", "loss.json", "manifest.json", "model.json",
      "scores_generated.csv", "scores_real.csv", "summary.csv"]
  loss = json.loads((out / "loss.json").read_text())
  assert envelope["result"] == loss
  assert {"test", "holdout", "best_epoch", "model_id", "mode",
          "support_gap", "coverage_fidelity"} <= set(loss)
  assert loss["test"]["n_p"] == 24 and loss["test"]["n_q"] == 24
  assert 0.0 <= loss["test"]["h2_clipped"] <= loss["test"]["cap"]

  real = datasets.read_scores(str(out / "scores_real.csv"))
  assert len(real) == 24
  assert real.source_label.value == "real"
  histogram = (out / "histogram.csv").read_text().splitlines()
  assert histogram[0] == ("lo,hi,count_real,density_real,count_generated,"
                          "density_generated")
  assert len(histogram) == 6
  summary = (out / "summary.csv").read_text().splitlines()
  assert summary[0].startswith("source_label,length,mean")
  assert [line.split(",")[0] for line in summary[1:]] == ["real",
                                                          "generated"]


def test_compare_split_is_seeded(samples, tmp_path, capsys):
  """Tests that two runs with one seed write identical artifacts."""
  p, q = samples
  for name in ("a", "b"):
    code, _ = _run(capsys, "compare", "--p", p, "--q", q, *FAST, "--seed",
                   "8", "--out-dir", str(tmp_path / name))
    assert code == 0
  for file in ("model.json", "scores_real.csv", "scores_generated.csv",
               "histogram.csv", "summary.csv", "loss.json"):
    assert (tmp_path / "a" / file).read_bytes() == (
        tmp_path / "b" / file).read_bytes()


def test_compare_guards_output_directory(samples, tmp_path, capsys):
  """Tests that a non-empty directory needs --force."""
  p, q = samples
  out = tmp_path / "cmp"
  out.mkdir()
  (out / "keep.txt").write_text("x")
  code, envelope = _run(capsys, "compare", "--p", p, "--q", q, *FAST,
                        "--out-dir", str(out))
  assert code == 2
  assert "--force" in envelope["error"]["message"]
  assert not (out / "model.json").exists()

  code, _ = _run(capsys, "compare", "--p", p, "--q", q, *FAST,
                 "--out-dir", str(out), "--force")
  assert code == 0
  assert (out / "model.json").exists()


@pytest.mark.parametrize(
    "extra",
    [
        ["--test-fraction", "0"],
        ["--test-fraction", "1.5"],
        ["--mode", "ksample"],
    ],
)
def test_compare_usage_errors(samples, tmp_path, capsys, extra):
  p, q = samples
  code, _ = _run(capsys, "compare", "--p", p, "--q", q, *extra,
                 "--out-dir", str(tmp_path / "cmp"))
  assert code == 2
