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

"""Run configuration files for the training commands."""

import dataclasses
import json
import logging
import os
from typing import Any

from rdr_eval import divergence
from rdr_eval import estimator
from rdr_eval.errors import ConfigError
from rdr_eval.errors import DataError

import yaml

logger = logging.getLogger(__name__)

SUPPORTED_SCHEMA_VERSIONS = ("1",)
SEED_ENV = "RDR_SEED"

# name -> (JSON schema type, description). Drives validation and the
# published schema document.
FIELDS: dict[str, tuple[str, str]] = {
    "schema_version": ("string", "Configuration schema version."),
    "mode": ("string", "One of dr, rdr, ksample, classifier."),
    "alpha": ("number", "Weight of P in the rdr denominator mixture."),
    "epochs": ("integer", "Training epochs."),
    "batch_size": ("integer", "Rows drawn from each sample per step."),
    "seed": ("integer", "Seed of the split, initialization and batches."),
    "holdout_fraction": ("number", "Fraction of each sample held out."),
    "hidden_widths": ("array", "Widths of the hidden ReLU layers."),
    "learning_rate": ("number", "Adam step size."),
    "beta1": ("number", "Adam first-moment decay."),
    "beta2": ("number", "Adam second-moment decay."),
    "eps": ("number", "Adam denominator offset."),
    "scaling": ("string", "Column scaling fitted on the training rows."),
    "log_every": ("integer", "Epochs between progress log lines."),
    "objective": ("string", "hellinger_sq, or kl / chi_sq in dr mode."),
    "p": ("string", "Path of the real sample CSV."),
    "q": ("string", "Path of the generated sample CSV."),
}

_INTEGER_FIELDS = ("epochs", "batch_size", "seed", "log_every")
_NUMBER_FIELDS = ("alpha", "holdout_fraction", "learning_rate", "beta1",
                  "beta2", "eps")


@dataclasses.dataclass(frozen=True)
class RunConfig:
  """A validated run configuration; None means "not set"."""

  schema_version: str = "1"
  mode: str | None = None
  alpha: float | None = None
  epochs: int | None = None
  batch_size: int | None = None
  seed: int | None = None
  holdout_fraction: float | None = None
  hidden_widths: tuple[int, ...] | None = None
  learning_rate: float | None = None
  beta1: float | None = None
  beta2: float | None = None
  eps: float | None = None
  scaling: str | None = None
  log_every: int | None = None
  objective: str | None = None
  p: str | None = None
  q: str | None = None

  @classmethod
  def from_dict(cls, data: dict[str, Any]) -> "RunConfig":
    """Validates a decoded document.

    Raises:
        ConfigError: On unknown fields, a missing or unsupported schema
            version, or values of the wrong type.
    """
    if not isinstance(data, dict):
      raise ConfigError("configuration must be a mapping")
    unknown = sorted(set(data) - set(FIELDS))
    if unknown:
      raise ConfigError(f"unknown configuration fields: {unknown}")
    version = data.get("schema_version")
    if version is None:
      raise ConfigError("configuration is missing schema_version")
    if str(version) not in SUPPORTED_SCHEMA_VERSIONS:
      raise ConfigError(
          f"schema_version {version!r} is not supported; expected one of"
          f" {list(SUPPORTED_SCHEMA_VERSIONS)}"
      )
    values = {"schema_version": str(version)}
    for name, value in data.items():
      if name == "schema_version" or value is None:
        continue
      values[name] = _coerce(name, value)
    return cls(**values)

  def merged(self, **overrides: Any) -> "RunConfig":
    """Returns a copy where every non-None override wins."""
    return dataclasses.replace(
        self, **{k: v for k, v in overrides.items() if v is not None})

  def train_config(self, **overrides: Any) -> estimator.TrainConfig:
    """Builds the estimator configuration: flags > file > RDR_SEED > default.
    """
    merged = self.merged(**overrides)
    values = {
        f.name: getattr(merged, f.name)
        for f in dataclasses.fields(estimator.TrainConfig)
        if getattr(merged, f.name, None) is not None
    }
    if "seed" not in values:
      values["seed"] = seed_from_env()
    try:
      return estimator.TrainConfig(**values)
    except ValueError as e:
      if isinstance(e, ConfigError):
        raise
      raise ConfigError(str(e)) from e


def _coerce(name: str, value: Any) -> Any:
  try:
    if name in _INTEGER_FIELDS:
      if isinstance(value, bool) or float(value) != int(float(value)):
        raise ValueError(value)
      return int(float(value))
    if name in _NUMBER_FIELDS:
      if isinstance(value, bool):
        raise ValueError(value)
      return float(value)
    if name == "hidden_widths":
      widths = tuple(int(w) for w in value)
      if any(w < 1 for w in widths):
        raise ValueError(value)
      return widths
    return str(value)
  except (TypeError, ValueError) as e:
    kind = FIELDS[name][0]
    raise ConfigError(f"field {name} must be a {kind}, got {value!r}") from e


def load(path: str) -> RunConfig:
  """Reads a JSON or YAML configuration file.

  Raises:
      DataError: If the file cannot be read.
      ConfigError: If the document cannot be parsed or is not a valid
          configuration.
  """
  try:
    with open(path, "r", encoding="utf-8") as f:
      text = f.read()
  except OSError as e:
    raise DataError(f"cannot read configuration {path}: {e}") from e
  try:
    if os.path.splitext(path)[1].lower() in (".yaml", ".yml"):
      data = yaml.safe_load(text)
    else:
      data = json.loads(text)
  except (json.JSONDecodeError, yaml.YAMLError) as e:
    raise ConfigError(f"cannot parse configuration {path}: {e}") from e
  logger.info("loaded configuration %s", path)
  return RunConfig.from_dict(data)


def seed_from_env(default: int = 0) -> int:
  value = os.environ.get(SEED_ENV)
  if value is None or not value.strip():
    return default
  try:
    return int(value)
  except ValueError as e:
    raise ConfigError(f"{SEED_ENV} must be an integer, got {value!r}") from e


def json_schema() -> dict[str, Any]:
  """The configuration schema as a JSON Schema document."""
  properties = {}
  for name, (kind, description) in FIELDS.items():
    prop: dict[str, Any] = {"type": kind, "description": description}
    if name == "schema_version":
      prop["enum"] = list(SUPPORTED_SCHEMA_VERSIONS)
    elif name == "mode":
      prop["enum"] = [m.value for m in estimator.Mode]
    elif name == "objective":
      prop["enum"] = [o.value for o in divergence.Objective]
    elif name == "scaling":
      prop["enum"] = [s.value for s in estimator.Scaling]
    elif name == "hidden_widths":
      prop["items"] = {"type": "integer", "minimum": 1}
    properties[name] = prop
  return {
      "$schema": "https://json-schema.org/draft/2020-12/schema",
      "title": "rdr-eval run configuration",
      "type": "object",
      "properties": properties,
      "required": ["schema_version"],
      "additionalProperties": False,
  }
