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

"""Tests for the datasets module."""

import json

from rdr_eval import datasets
from rdr_eval.errors import DataError
from rdr_eval.estimator import ScoreSet
from rdr_eval.estimator import SourceLabel
from rdr_eval.numerics import SampleMatrix
from rdr_eval.utils import VERSION

import numpy as np
import pytest


def test_write_and_read_dataset_bitwise(tmp_path):
  """Tests that written floats read back exactly."""
  values = np.random.default_rng(0).normal(size=(25, 2)) * 1e-3
  values[0, 0] = 0.1
  values[1, 1] = 1e300
  path = str(tmp_path / "sample.csv")
  datasets.write_dataset(path, SampleMatrix(values, ("a", "b")),
                         ids=[f"s{i}" for i in range(25)])
  dataset = datasets.read_dataset(path)
  assert dataset.matrix.names == ("a", "b")
  assert dataset.ids[:2] == ("s0", "s1")
  assert dataset.labels is None
  assert dataset.matrix.values.tobytes() == values.tobytes()
  assert dataset.path == path


def test_read_dataset_labels_and_header_only(tmp_path):
  path = tmp_path / "labelled.csv"
  path.write_text("x,label\n1.5,cat\n2.5,dog\n")
  dataset = datasets.read_dataset(str(path))
  assert dataset.labels == ("cat", "dog")
  empty = tmp_path / "empty.csv"
  empty.write_text("x,y\n")
  assert datasets.read_dataset(str(empty)).n_rows == 0


@pytest.mark.parametrize(
    ("text", "match"),
    [
        ("x,y\n1,2\n3,abc\n", r"line 3, column 'y'"),
        ("x\n1\ninf\n", r"line 3, column 'x'.*not finite"),
        ("id,label\na,b\n", "no data columns"),
        ("id,x\na,1\na,2\n", "duplicate ids"),
        ("", "empty"),
        ("x,y\n1,2\n3\n", r"line 3, column 'y'"),
    ],
)
def test_read_dataset_errors(tmp_path, text, match):
  """Tests that malformed CSV files name the problem."""
  path = tmp_path / "bad.csv"
  path.write_text(text)
  with pytest.raises(DataError, match=match):
    datasets.read_dataset(str(path))


def test_read_dataset_missing_file(tmp_path):
  with pytest.raises(DataError, match="not found"):
    datasets.read_dataset(str(tmp_path / "nope.csv"))


def test_write_and_read_scores(tmp_path):
  """Tests the score CSV columns and the g column."""
  path = str(tmp_path / "scores.csv")
  scores = ScoreSet([0.5, 1.0, 1.5], SourceLabel.GENERATED, "m",
                    sample_ids=("a", "b", "c"))
  datasets.write_scores(path, scores)
  with open(path, encoding="utf-8") as f:
    lines = f.read().splitlines()
  assert lines[0] == "id,score,g,source_label"
  assert lines[2] == "b,1.0,1.0,generated"
  assert lines[3] == "c,1.5,3.0,generated"
  restored = datasets.read_scores(path)
  assert restored.ids() == ("a", "b", "c")
  assert restored.source_label is SourceLabel.GENERATED
  np.testing.assert_array_equal(restored.scores, scores.scores)


def test_write_scores_dr_space(tmp_path):
  path = str(tmp_path / "dr.csv")
  datasets.write_scores(path, ScoreSet([4.0], "real", "m"), dr_space=True)
  with open(path, encoding="utf-8") as f:
    assert f.read().splitlines()[1] == "0,4.0,4.0,real"


def test_read_scores_errors(tmp_path):
  """Tests missing columns and mixed labels."""
  path = tmp_path / "scores.csv"
  path.write_text("id,score\na,1.0\n")
  with pytest.raises(DataError, match="source_label"):
    datasets.read_scores(str(path))
  path.write_text("id,score,source_label\na,1.0,real\nb,1.0,generated\n")
  with pytest.raises(DataError, match="mixes"):
    datasets.read_scores(str(path))


@pytest.mark.parametrize(
    ("text", "expected"),
    [
        ("a: g1\nb: g2\n", {"group": {"a": "g1", "b": "g2"}}),
        ("phylum:\n  a: p1\nspecies:\n",
         {"phylum": {"a": "p1"}, "species": None}),
    ],
)
def test_read_mapping(tmp_path, text, expected):
  """Tests flat and per-level mapping files."""
  path = tmp_path / "map.yaml"
  path.write_text(text)
  mapping = datasets.read_mapping(str(path))
  assert mapping == expected
  assert list(mapping) == list(expected)


@pytest.mark.parametrize("text", ["[1, 2]\n", "{}\n", "a: [\n"])
def test_read_mapping_errors(tmp_path, text):
  path = tmp_path / "map.yaml"
  path.write_text(text)
  with pytest.raises(DataError):
    datasets.read_mapping(str(path))


def test_write_manifest_hashes(tmp_path):
  """Tests the manifest content."""
  data = tmp_path / "in.csv"
  data.write_text("x\n1\n")
  out = tmp_path / "out.csv"
  out.write_text("y\n2\n")
  manifest = str(tmp_path / "out.manifest.json")
  datasets.write_manifest(manifest, "eval", ["eval", "--x"], 4, [str(data)],
                          [str(out), str(tmp_path / "never.csv")])
  with open(manifest, encoding="utf-8") as f:
    document = json.load(f)
  assert document["command"] == "eval"
  assert document["seed"] == 4
  assert document["version"] == VERSION
  assert list(document["inputs"]) == [str(data)]
  assert len(document["inputs"][str(data)]) == 64
  assert list(document["outputs"]) == [str(out)]


def test_manifest_path_for():
  assert datasets.manifest_path_for("out/scores.csv") == (
      "out/scores.manifest.json")


def test_envelopes():
  """Tests the success and error JSON lines."""
  line = datasets.envelope("grid", ["m.json"], ["g.csv"], 3, {"points": 5})
  assert "\n" not in line
  assert json.loads(line) == {
      "command": "grid",
      "inputs": ["m.json"],
      "outputs": ["g.csv"],
      "seed": 3,
      "version": VERSION,
      "result": {"points": 5},
  }
  error = json.loads(datasets.error_envelope("eval", DataError("bad"), 3))
  assert error == {"command": "eval",
                   "error": {"type": "DataError", "message": "bad"},
                   "exit_code": 3}


def test_score_report():
  assert datasets.score_report(ScoreSet([], "real", "m")) == {"n": 0}
  assert datasets.score_report(ScoreSet([1.0, 3.0], "real", "m")) == {
      "n": 2, "mean": 2.0, "min": 1.0, "max": 3.0}
