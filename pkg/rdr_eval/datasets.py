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

"""CSV, JSON and manifest files exchanged by the commands.

Floats are written as the shortest decimal that round-trips, and read back
with round-trip precision, so any emitted file reproduces its values
bitwise.
"""

import dataclasses
import json
import logging
import os
from typing import Any, Mapping, Sequence

from rdr_eval import divergence
from rdr_eval.errors import DataError
from rdr_eval.errors import DomainError
from rdr_eval.estimator import ScoreSet
from rdr_eval.estimator import SourceLabel
from rdr_eval.numerics import SampleMatrix
from rdr_eval.utils import file_sha256
from rdr_eval.utils import format_float
from rdr_eval.utils import VERSION

import numpy as np
import pandas as pd
import yaml

logger = logging.getLogger(__name__)

ID_COLUMN = "id"
LABEL_COLUMN = "label"


@dataclasses.dataclass(frozen=True)
class CsvDataset:
  """A numeric table with optional `id` and `label` columns."""

  matrix: SampleMatrix
  ids: tuple[str, ...] | None = None
  labels: tuple[str, ...] | None = None
  path: str | None = None

  @property
  def n_rows(self) -> int:
    return self.matrix.n_rows


def _read_frame(path: str, text_columns: Sequence[str] = ()) -> pd.DataFrame:
  if not os.path.isfile(path):
    raise DataError(f"input file not found: {path}")
  try:
    return pd.read_csv(
        path,
        dtype={c: str for c in text_columns},
        float_precision="round_trip",
        keep_default_na=False,
        index_col=False,
        skipinitialspace=True,
    )
  except pd.errors.EmptyDataError as e:
    raise DataError(f"{path} is empty; a header row is required") from e
  except (pd.errors.ParserError, UnicodeDecodeError) as e:
    raise DataError(f"{path} is not a rectangular CSV table: {e}") from e


def _numeric_column(frame: pd.DataFrame, name: str, path: str) -> np.ndarray:
  column = frame[name]
  if column.dtype.kind not in "fiu":
    parsed = pd.to_numeric(column, errors="coerce")
    bad = np.flatnonzero(parsed.isna().to_numpy())
    if bad.size:
      row = int(bad[0])
      # +2: one header line, 1-based rows.
      raise DataError(
          f"{path}: line {row + 2}, column {name!r}: cannot parse"
          f" {column.iloc[row]!r} as a number"
      )
    column = parsed
  values = column.to_numpy(dtype=np.float64)
  bad = np.flatnonzero(~np.isfinite(values))
  if bad.size:
    row = int(bad[0])
    raise DataError(
        f"{path}: line {row + 2}, column {name!r}: value is not finite"
    )
  return values


def read_dataset(path: str) -> CsvDataset:
  """Reads a numeric CSV with a header row.

  Raises:
      DataError: If the file is missing, ragged, or holds a non-numeric or
          non-finite data value; the message names the line and column.
  """
  frame = _read_frame(path, text_columns=(ID_COLUMN, LABEL_COLUMN))
  names = [str(c) for c in frame.columns if c not in (ID_COLUMN, LABEL_COLUMN)]
  if not names:
    raise DataError(f"{path} has no data columns")
  if frame.shape[0]:
    values = np.column_stack([_numeric_column(frame, n, path) for n in names])
  else:
    values = np.zeros((0, len(names)))
  ids = labels = None
  if ID_COLUMN in frame.columns:
    ids = tuple(frame[ID_COLUMN].astype(str))
    if len(set(ids)) != len(ids):
      raise DataError(f"{path} has duplicate ids")
  if LABEL_COLUMN in frame.columns:
    labels = tuple(frame[LABEL_COLUMN].astype(str))
  logger.info("read %d rows x %d columns from %s", values.shape[0],
              values.shape[1], path)
  try:
    matrix = SampleMatrix(values, tuple(names))
  except DomainError as e:
    raise DataError(f"{path}: {e}") from e
  return CsvDataset(matrix, ids, labels, path)


def _format_column(values) -> list[str]:
  return [format_float(v) for v in np.asarray(values, dtype=np.float64)]


def write_frame(path: str, columns: Mapping[str, Any] | pd.DataFrame) -> str:
  """Writes named columns; float columns use round-trip formatting."""
  if isinstance(columns, pd.DataFrame):
    columns = {c: columns[c].to_numpy() for c in columns.columns}
  data = {}
  for name, values in columns.items():
    array = np.asarray(values)
    if array.dtype.kind == "f":
      data[name] = _format_column(array)
    else:
      data[name] = [str(v) for v in array.tolist()]
  directory = os.path.dirname(path)
  if directory:
    os.makedirs(directory, exist_ok=True)
  pd.DataFrame(data).to_csv(path, index=False, lineterminator="\n")
  logger.info("wrote %s", path)
  return path


def write_dataset(path: str, matrix: SampleMatrix,
                  ids: Sequence[str] | None = None) -> str:
  columns: dict[str, Any] = {}
  if ids is not None:
    columns[ID_COLUMN] = np.asarray(ids, dtype=object)
  for j, name in enumerate(matrix.names):
    columns[name] = matrix.values[:, j]
  return write_frame(path, columns)


def write_scores(path: str, scores: ScoreSet, dr_space: bool = False) -> str:
  """Writes id, score, g and source_label columns.

  Args:
      path: Output CSV.
      scores: The scores.
      dr_space: Whether the scores are density ratios rather than relative
          ratios; the g column then repeats them.
  """
  values = scores.scores
  g = values if dr_space else divergence.dr_from_rdr(values)
  return write_frame(path, {
      "id": np.asarray(scores.ids(), dtype=object),
      "score": values,
      "g": g,
      "source_label": np.asarray([scores.source_label.value] * len(scores),
                                 dtype=object),
  })


def read_scores(path: str) -> ScoreSet:
  """Reads a score CSV written by `write_scores`."""
  frame = _read_frame(path, text_columns=("id", "source_label"))
  missing = [c for c in ("id", "score", "source_label")
             if c not in frame.columns]
  if missing:
    raise DataError(f"{path} is missing score columns {missing}")
  labels = set(frame["source_label"])
  if len(labels) > 1:
    raise DataError(f"{path} mixes source labels {sorted(labels)}")
  try:
    label = SourceLabel(labels.pop()) if labels else SourceLabel.OTHER
  except ValueError as e:
    raise DataError(f"{path}: unknown source label: {e}") from e
  values = _numeric_column(frame, "score", path) if frame.shape[0] else []
  return ScoreSet(scores=values, source_label=label, model_id="",
                  sample_ids=tuple(frame["id"].astype(str)))


def read_mapping(path: str) -> dict[str, dict[str, str] | None]:
  """Reads column-to-group mappings from YAML or JSON.

  A flat {column: group} document is one level named "group"; a nested
  {level: {column: group}} document keeps its level order.
  """
  if not os.path.isfile(path):
    raise DataError(f"mapping file not found: {path}")
  with open(path, "r", encoding="utf-8") as f:
    try:
      data = yaml.safe_load(f)
    except yaml.YAMLError as e:
      raise DataError(f"cannot parse mapping {path}: {e}") from e
  if not isinstance(data, dict) or not data:
    raise DataError(f"mapping {path} must be a non-empty mapping")
  if all(isinstance(v, dict) or v is None for v in data.values()):
    return {str(level): (None if m is None else
                         {str(k): str(v) for k, v in m.items()})
            for level, m in data.items()}
  return {"group": {str(k): str(v) for k, v in data.items()}}


def write_json(path: str, document: Any) -> str:
  directory = os.path.dirname(path)
  if directory:
    os.makedirs(directory, exist_ok=True)
  with open(path, "w", encoding="utf-8") as f:
    f.write(json.dumps(document, indent=2, sort_keys=True, allow_nan=False))
    f.write("\n")
  logger.info("wrote %s", path)
  return path


def write_text(path: str, text: str) -> str:
  directory = os.path.dirname(path)
  if directory:
    os.makedirs(directory, exist_ok=True)
  with open(path, "w", encoding="utf-8") as f:
    f.write(text)
  logger.info("wrote %s", path)
  return path


def hashes(paths: Sequence[str]) -> dict[str, str]:
  return {p: file_sha256(p) for p in paths if os.path.isfile(p)}


def manifest_path_for(output: str) -> str:
  """`<stem>.manifest.json` beside a single output file."""
  stem, _ = os.path.splitext(output)
  return f"{stem}.manifest.json"


def write_manifest(path: str, command: str, argv: Sequence[str], seed,
                   inputs: Sequence[str], outputs: Sequence[str]) -> str:
  """Records the invocation, seed and content hashes of inputs and outputs."""
  return write_json(path, {
      "command": command,
      "argv": list(argv),
      "seed": seed,
      "version": VERSION,
      "inputs": hashes(inputs),
      "outputs": hashes(outputs),
  })


def envelope(command: str, inputs: Sequence[str], outputs: Sequence[str],
             seed, result: Any) -> str:
  """The one-line JSON result printed on standard output."""
  return json.dumps({
      "command": command,
      "inputs": list(inputs),
      "outputs": list(outputs),
      "seed": seed,
      "version": VERSION,
      "result": result,
  }, allow_nan=False)


def error_envelope(command: str | None, error: BaseException,
                   exit_code: int) -> str:
  return json.dumps({
      "command": command,
      "error": {"type": type(error).__name__, "message": str(error)},
      "exit_code": exit_code,
  })


def score_report(scores: ScoreSet) -> dict[str, Any]:
  """Range and mean of a score set, for result envelopes."""
  values = scores.scores
  if values.size == 0:
    return {"n": 0}
  return {
      "n": int(values.size),
      "mean": float(values.mean()),
      "min": float(values.min()),
      "max": float(values.max()),
  }

