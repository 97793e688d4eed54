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

"""The attribute command: relate scores to per-sample covariates."""

import argparse
import dataclasses
import logging

from rdr_eval import analytics
from rdr_eval import datasets
from rdr_eval.coordinator import cli
from rdr_eval.coordinator import CommandResult
from rdr_eval.errors import DataError
from rdr_eval.numerics import SampleMatrix

import numpy as np

logger = logging.getLogger(__name__)


def add_arguments(parser: argparse.ArgumentParser) -> None:
  parser.add_argument(
      "--scores", action="append", required=True,
      help="Score CSV; repeat to stack real and generated scores in order.")
  parser.add_argument("--covariates", required=True,
                      help="Covariate CSV, joined on its id column if any.")
  parser.add_argument("--method", choices=["logistic", "spearman"],
                      default="logistic")
  parser.add_argument("--threshold", type=float, default=1.0,
                      help="Logistic label is 1{score > threshold}.")
  parser.add_argument("--clr", action="store_true",
                      help="Treat covariates as compositions (spearman).")
  parser.add_argument("--mapping", default=None,
                      help="YAML/JSON column-to-group mapping per level.")
  parser.add_argument("--pseudocount", type=float,
                      default=analytics.CLR_PSEUDOCOUNT)
  parser.add_argument("--out", required=True)


def align(scores: list, covariates: datasets.CsvDataset
         ) -> tuple[np.ndarray, SampleMatrix]:
  """Stacks score sets and lines covariate rows up with them.

  Raises:
      DataError: If rows cannot be matched; unmatched ids are listed.
  """
  values = np.concatenate([s.scores for s in scores])
  ids = [i for s in scores for i in s.ids()]
  if covariates.n_rows == 0:
    raise DataError(f"{covariates.path} has no rows")
  if covariates.ids is None:
    if covariates.n_rows != values.size:
      raise DataError(
          f"{covariates.path} has {covariates.n_rows} rows for"
          f" {values.size} scores and no id column to join on"
      )
    return values, covariates.matrix
  if len(set(ids)) != len(ids):
    raise DataError("score ids are not unique across the score files")
  position = {i: k for k, i in enumerate(covariates.ids)}
  unmatched = [i for i in ids if i not in position]
  if unmatched:
    raise DataError(
        f"{len(unmatched)} score ids have no covariate row: {unmatched[:20]}")
  rows = [position[i] for i in ids]
  return values, covariates.matrix.take(rows)


def plain_scan(values: np.ndarray, matrix: SampleMatrix
              ) -> list[analytics.AssociationRow]:
  rows = []
  for j, name in enumerate(matrix.names):
    column = matrix.values[:, j]
    if np.all(column == column[0]):
      logger.warning("covariate %s is constant; skipped", name)
      continue
    result = analytics.spearman(values, column)
    rows.append(analytics.AssociationRow("features", name, result.rho,
                                         result.p_value, result.n))
  rows.sort(key=lambda r: -abs(r.rho))
  return rows


@cli.command("attribute", arguments=add_arguments)
def attribute(args: argparse.Namespace) -> CommandResult:
  """Logistic attribution of r > threshold, or a Spearman association scan.
  """
  scores = [datasets.read_scores(path) for path in args.scores]
  covariates = datasets.read_dataset(args.covariates)
  values, matrix = align(scores, covariates)
  inputs = [*args.scores, args.covariates]

  if args.method == "logistic":
    report = analytics.logistic_attribution(values, matrix, args.threshold)
    output = datasets.write_frame(args.out, report.to_frame())
    result = {
        "converged": report.converged,
        "iterations": report.iterations,
        "separation": report.separation,
        "top": report.rows[0].name if report.rows else None,
    }
  else:
    if args.clr:
      table = analytics.CompositionTable.from_counts(matrix)
      mappings = ({"features": None} if args.mapping is None
                  else datasets.read_mapping(args.mapping))
      if args.mapping:
        inputs.append(args.mapping)
      levels = analytics.association_scan(values, table, mappings,
                                          args.pseudocount)
      rows = [row for level_rows in levels.values() for row in level_rows]
    else:
      rows = plain_scan(values, matrix)
    output = datasets.write_frame(args.out, {
        field.name: np.asarray([getattr(r, field.name) for r in rows],
                               dtype=object if field.type is str else None)
        for field in dataclasses.fields(analytics.AssociationRow)
    })
    result = {"rows": len(rows),
              "top": rows[0].group if rows else None}
  return CommandResult(
      inputs=inputs,
      outputs=[output],
      seed=None,
      result=result,
      manifest=datasets.manifest_path_for(args.out),
  )
