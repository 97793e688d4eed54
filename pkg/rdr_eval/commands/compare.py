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

"""The compare command: split, train, score both test sides, summarize."""

import argparse
import dataclasses
import os

from rdr_eval import analytics
from rdr_eval import datasets
from rdr_eval import estimator
from rdr_eval import numerics
from rdr_eval.commands import train as train_command
from rdr_eval.coordinator import cli
from rdr_eval.coordinator import CommandResult
from rdr_eval.errors import ConfigError
from rdr_eval.errors import UsageError
from rdr_eval.estimator import SourceLabel

import numpy as np

# Stream key of the train/test split, independent of the training stream.
SPLIT_STREAM = 1


def add_arguments(parser: argparse.ArgumentParser) -> None:
  parser.add_argument("--p", default=None, help="Real sample CSV.")
  parser.add_argument("--q", default=None, help="Generated sample CSV.")
  train_command.add_training_arguments(parser)
  parser.add_argument("--test-fraction", type=float, default=0.3)
  parser.add_argument("--bins", type=int, default=20)
  parser.add_argument("--tol", type=float, default=0.1,
                      help="Band width of the coverage/fidelity masses.")
  parser.add_argument("--out-dir", required=True)
  parser.add_argument("--force", action="store_true",
                      help="Overwrite a non-empty output directory.")


def split_test(matrix: numerics.SampleMatrix, ids, fraction: float,
               rng: numerics.RngState):
  """Returns (train rows, test rows, test ids) of a seeded random split."""
  order = numerics.rng_permutation(rng, matrix.n_rows)
  n_test = int(round(matrix.n_rows * fraction))
  test = np.sort(order[:n_test])
  train = np.sort(order[n_test:])
  test_ids = (tuple(ids[i] for i in test) if ids is not None
              else tuple(str(i) for i in test))
  return matrix.take(train), matrix.take(test), test_ids


@cli.command("compare", arguments=add_arguments)
def compare(args: argparse.Namespace) -> CommandResult:
  """One-shot pipeline from two samples to loss, histogram and summaries.

  Holds out a test part of each sample, trains on the rest, scores both test
  parts, and writes model.json, scores_real.csv, scores_generated.csv,
  histogram.csv, summary.csv and loss.json into --out-dir.
  """
  if not 0.0 < args.test_fraction < 1.0:
    raise ConfigError(
        f"--test-fraction must lie in (0, 1), got {args.test_fraction}")
  if (os.path.isdir(args.out_dir) and os.listdir(args.out_dir)
      and not args.force):
    raise UsageError(
        f"{args.out_dir} is not empty; pass --force to overwrite it")
  run, train_config = train_command.resolve(args)
  if train_config.mode is estimator.Mode.KSAMPLE:
    raise ConfigError("compare takes two samples; use train for ksample")
  p_path, q_path = args.p or run.p, args.q or run.q
  if not p_path or not q_path:
    raise ConfigError("compare needs --p and --q (or p and q in --config)")

  real = datasets.read_dataset(p_path)
  generated = datasets.read_dataset(q_path)
  rng = numerics.RngState(train_config.seed).spawn(SPLIT_STREAM)
  xp_train, xp_test, p_ids = split_test(real.matrix, real.ids,
                                        args.test_fraction, rng)
  xq_train, xq_test, q_ids = split_test(generated.matrix, generated.ids,
                                        args.test_fraction, rng)
  model, trace = estimator.train(xp_train, xq_train, train_config)

  test_report = estimator.estimate_h2(model, xp_test, xq_test)
  real_scores = estimator.evaluate(model, xp_test, SourceLabel.REAL, p_ids)
  generated_scores = estimator.evaluate(model, xq_test, SourceLabel.GENERATED,
                                        q_ids)
  dr = model.mode is estimator.Mode.DR
  value_range = ((0.0, float(max(real_scores.scores.max(),
                                 generated_scores.scores.max())))
                 if dr else (0.0, 2.0))
  hist = analytics.histogram([real_scores, generated_scores], args.bins,
                             value_range)
  summaries = {
      SourceLabel.REAL.value: analytics.summarize(real_scores),
      SourceLabel.GENERATED.value: analytics.summarize(generated_scores),
  }
  gap = analytics.support_gap(real_scores, generated_scores)
  coverage = analytics.coverage_fidelity(real_scores, generated_scores,
                                         args.tol)

  out = args.out_dir
  loss = {
      "test": test_report.to_dict(),
      "holdout": model.holdout.to_dict(),
      "best_epoch": trace.best_epoch,
      "model_id": model.model_id,
      "mode": model.mode.value,
      "support_gap": dataclasses.asdict(gap),
      "coverage_fidelity": dataclasses.asdict(coverage),
      "overflow": hist.overflow,
      "underflow": hist.underflow,
  }
  outputs = [
      datasets.write_text(os.path.join(out, "model.json"), model.to_json()),
      datasets.write_scores(os.path.join(out, "scores_real.csv"), real_scores,
                            dr_space=dr),
      datasets.write_scores(os.path.join(out, "scores_generated.csv"),
                            generated_scores, dr_space=dr),
      datasets.write_frame(os.path.join(out, "histogram.csv"),
                           hist.to_frame()),
      datasets.write_frame(os.path.join(out, "summary.csv"), {
          "source_label": np.asarray(list(summaries), dtype=object),
          **{field: np.asarray([getattr(s, field) for s in summaries.values()])
             for field in ("length", "mean", "std", "min", "q1", "median",
                           "q3", "max")},
      }),
      datasets.write_json(os.path.join(out, "loss.json"), loss),
  ]
  return CommandResult(
      inputs=[p_path, q_path],
      outputs=outputs,
      seed=train_config.seed,
      result=loss,
      manifest=os.path.join(out, "manifest.json"),
  )
