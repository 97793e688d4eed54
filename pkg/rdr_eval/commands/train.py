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

"""The train command: fits a ratio network from two (or K) CSV samples."""

import argparse
import os

from rdr_eval import config
from rdr_eval import datasets
from rdr_eval import estimator
from rdr_eval.coordinator import cli
from rdr_eval.coordinator import CommandResult
from rdr_eval.errors import ConfigError
from rdr_eval.utils import file_sha256


def parse_widths(text: str) -> tuple[int, ...]:
  try:
    return tuple(int(w) for w in text.split(",") if w.strip())
  except ValueError as e:
    raise argparse.ArgumentTypeError(f"invalid widths {text!r}") from e


def add_training_arguments(parser: argparse.ArgumentParser) -> None:
  """Flags shared by train and compare; each overrides the config file."""
  parser.add_argument("--config", default=None,
                      help="JSON or YAML run configuration.")
  parser.add_argument("--mode", choices=[m.value for m in estimator.Mode],
                      default=None)
  parser.add_argument("--alpha", type=float, default=None)
  parser.add_argument("--objective", default=None,
                      choices=["hellinger_sq", "kl", "chi_sq"])
  parser.add_argument("--epochs", type=int, default=None)
  parser.add_argument("--batch-size", type=int, default=None)
  parser.add_argument("--seed", type=int, default=None)
  parser.add_argument("--hidden-widths", type=parse_widths, default=None,
                      help="Comma-separated hidden layer widths.")
  parser.add_argument("--learning-rate", type=float, default=None)
  parser.add_argument("--holdout-fraction", type=float, default=None)
  parser.add_argument("--scaling", default=None,
                      choices=[s.value for s in estimator.Scaling])


def add_arguments(parser: argparse.ArgumentParser) -> None:
  parser.add_argument("--p", default=None, help="Real sample CSV.")
  parser.add_argument(
      "--q", action="append", default=None,
      help="Generated sample CSV; repeat for the extra samples of ksample.")
  add_training_arguments(parser)
  parser.add_argument("--out-model", required=True)
  parser.add_argument("--trace", default=None,
                      help="Per-epoch loss CSV.")


def resolve(args: argparse.Namespace) -> tuple[config.RunConfig,
                                                estimator.TrainConfig]:
  """Merges flags over the config file; flags win."""
  run = config.load(args.config) if args.config else config.RunConfig()
  train_config = run.train_config(
      mode=args.mode,
      alpha=args.alpha,
      objective=args.objective,
      epochs=args.epochs,
      batch_size=args.batch_size,
      seed=args.seed,
      hidden_widths=args.hidden_widths,
      learning_rate=args.learning_rate,
      holdout_fraction=args.holdout_fraction,
      scaling=args.scaling,
  )
  return run, train_config


def write_trace(path: str, trace: estimator.TrainTrace) -> str:
  return datasets.write_frame(path, {
      "epoch": list(range(len(trace.train_loss))),
      "train_loss": trace.train_loss,
      "holdout_loss": trace.holdout_loss,
  })


def model_paths(out_model: str, k_total: int) -> list[str]:
  if k_total == 1:
    return [out_model]
  stem, ext = os.path.splitext(out_model)
  return [f"{stem}.{k}{ext or '.json'}" for k in range(k_total)]


def fit_report(model: estimator.TrainedRatio,
               trace: estimator.TrainTrace) -> dict:
  return {
      "model_id": model.model_id,
      "mode": model.mode.value,
      "head": model.spec.head.value,
      "best_epoch": trace.best_epoch,
      "holdout": model.holdout.to_dict(),
  }


@cli.command("train", arguments=add_arguments)
def train(args: argparse.Namespace) -> CommandResult:
  """Fits a ratio network of P against Q and writes the model JSON.

  Prints the holdout loss report of the selected epoch.
  """
  run, train_config = resolve(args)
  p_path = args.p or run.p
  q_paths = args.q or ([run.q] if run.q else [])
  if not p_path or not q_paths:
    raise ConfigError("train needs --p and --q (or p and q in --config)")
  ksample = train_config.mode is estimator.Mode.KSAMPLE
  if len(q_paths) > 1 and not ksample:
    raise ConfigError(f"mode {train_config.mode.value} takes a single --q")

  inputs = [p_path, *q_paths]
  samples = [datasets.read_dataset(path).matrix for path in inputs]
  training_inputs = {path: file_sha256(path) for path in inputs}
  if ksample:
    fits = estimator.ksample_fit(samples, train_config)
  else:
    fits = [estimator.train(samples[0], samples[1], train_config)]

  outputs = []
  paths = model_paths(args.out_model, len(fits))
  for path, (model, _) in zip(paths, fits):
    outputs.append(datasets.write_text(
        path, model.to_json({"training_inputs": training_inputs})))
  if args.trace:
    for path, (_, trace) in zip(model_paths(args.trace, len(fits)), fits):
      outputs.append(write_trace(path, trace))

  reports = [fit_report(model, trace) for model, trace in fits]
  result = reports[0] if len(reports) == 1 else {"models": reports}
  return CommandResult(
      inputs=inputs,
      outputs=outputs,
      seed=train_config.seed,
      result=result,
      manifest=datasets.manifest_path_for(args.out_model),
  )
