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

"""The eval and grid commands: score data or a 1-D grid with a model."""

import argparse
import logging
import os

from rdr_eval import datasets
from rdr_eval import divergence
from rdr_eval import estimator
from rdr_eval import network
from rdr_eval.coordinator import cli
from rdr_eval.coordinator import CommandResult
from rdr_eval.errors import DataError
from rdr_eval.errors import UsageError
from rdr_eval.utils import file_sha256

logger = logging.getLogger(__name__)


def load_model(path: str) -> tuple[estimator.TrainedRatio, dict]:
  """Reads a model file; returns the model and its recorded training inputs.
  """
  if not os.path.isfile(path):
    raise DataError(f"model file not found: {path}")
  with open(path, "r", encoding="utf-8") as f:
    text = f.read()
  document = network.deserialize_document(text)
  model = estimator.TrainedRatio.from_document(document)
  return model, dict(document.meta.get("training_inputs") or {})


def add_eval_arguments(parser: argparse.ArgumentParser) -> None:
  parser.add_argument("--model", required=True)
  parser.add_argument("--data", required=True)
  parser.add_argument("--out", required=True)
  parser.add_argument("--label", default="other",
                      choices=[s.value for s in estimator.SourceLabel])
  parser.add_argument("--allow-train-eval", action="store_true",
                      help="Permit scoring a file the model was trained on.")


@cli.command("eval", arguments=add_eval_arguments)
def evaluate(args: argparse.Namespace) -> CommandResult:
  """Scores every row of a CSV sample and writes a score CSV."""
  model, training_inputs = load_model(args.model)
  digest = file_sha256(args.data) if os.path.isfile(args.data) else None
  if digest in training_inputs.values() and not args.allow_train_eval:
    raise UsageError(
        f"{args.data} was used to train {args.model}; pass"
        " --allow-train-eval to score it anyway"
    )
  dataset = datasets.read_dataset(args.data)
  scores = estimator.evaluate(model, dataset.matrix, args.label, dataset.ids)
  output = datasets.write_scores(args.out, scores,
                                 dr_space=model.mode is estimator.Mode.DR)
  return CommandResult(
      inputs=[args.model, args.data],
      outputs=[output],
      seed=model.seed,
      result={"model_id": model.model_id, **datasets.score_report(scores)},
      manifest=datasets.manifest_path_for(args.out),
  )


def add_grid_arguments(parser: argparse.ArgumentParser) -> None:
  parser.add_argument("--model", required=True)
  parser.add_argument("--lo", type=float, required=True)
  parser.add_argument("--hi", type=float, required=True)
  parser.add_argument("--points", type=int, default=500)
  parser.add_argument("--out", required=True)


@cli.command("grid", arguments=add_grid_arguments)
def grid(args: argparse.Namespace) -> CommandResult:
  """Scores an evenly spaced grid with a 1-D model (x, score, g)."""
  model, _ = load_model(args.model)
  x, scores = estimator.evaluate_grid(model, args.lo, args.hi, args.points)
  dr = model.mode is estimator.Mode.DR
  g = scores if dr else divergence.dr_from_rdr(scores)
  output = datasets.write_frame(args.out, {"x": x, "score": scores, "g": g})
  return CommandResult(
      inputs=[args.model],
      outputs=[output],
      seed=model.seed,
      result={"model_id": model.model_id, "points": int(x.size)},
      manifest=datasets.manifest_path_for(args.out),
  )
