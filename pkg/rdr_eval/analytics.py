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

"""Diagnostics computed from ratio scores.

Histograms and summaries of score sets, logistic attribution of the event
r(x) > 1 to covariates, Spearman association with CLR-transformed
compositional features, and the support/coverage diagnostics read off the
score distributions.
"""

import dataclasses
import logging
from typing import Mapping, Sequence

from rdr_eval import numerics
from rdr_eval.errors import ConfigError
from rdr_eval.errors import DataError
from rdr_eval.errors import DomainError
from rdr_eval.errors import ShapeError
from rdr_eval.errors import SingularSystemError
from rdr_eval.estimator import ScoreSet
from rdr_eval.numerics import SampleMatrix

import numpy as np
import pandas as pd
import scipy.linalg
import scipy.stats

logger = logging.getLogger(__name__)

RIDGE = 1e-8
COEF_LIMIT = 30.0
SEPARATION_TOLERANCE = 1e-6
IRLS_TOLERANCE = 1e-8
IRLS_MAX_ITER = 100
CLR_PSEUDOCOUNT = 1e-6
COMPOSITION_TOLERANCE = 1e-6
PERMUTATION_MAX_N = 30
PERMUTATIONS = 10_000
INTERCEPT = "(intercept)"


def _score_values(scores) -> np.ndarray:
  if isinstance(scores, ScoreSet):
    return scores.scores
  return np.asarray(scores, dtype=np.float64).reshape(-1)


def _sample_std(values: np.ndarray) -> float:
  # Constant scores give exactly zero rather than rounding noise.
  if values.size < 2 or values.min() == values.max():
    return 0.0
  return float(np.std(values, ddof=1))


@dataclasses.dataclass(frozen=True)
class Histogram:
  """Binned scores per source label.

  Bins are half-open [e_k, e_k+1) except the last, which is closed. Scores
  outside the edges are counted in `underflow` and `overflow`.
  """

  edges: np.ndarray
  counts: dict[str, np.ndarray]
  underflow: dict[str, int]
  overflow: dict[str, int]

  def densities(self) -> dict[str, np.ndarray]:
    widths = np.diff(self.edges)
    out = {}
    for label, counts in self.counts.items():
      total = counts.sum() + self.underflow[label] + self.overflow[label]
      out[label] = counts / (total * widths) if total else counts * 0.0
    return out

  def to_frame(self) -> pd.DataFrame:
    frame = pd.DataFrame({"lo": self.edges[:-1], "hi": self.edges[1:]})
    densities = self.densities()
    for label, counts in self.counts.items():
      frame[f"count_{label}"] = counts
      frame[f"density_{label}"] = densities[label]
    return frame


def histogram(scores: Sequence[ScoreSet], bins: int = 20,
              value_range: tuple[float, float] = (0.0, 2.0)) -> Histogram:
  """Bins each score set on a shared grid; sets with one label are pooled."""
  lo, hi = value_range
  if bins < 1 or not lo < hi:
    raise ConfigError(f"need bins >= 1 and lo < hi, got {bins}, [{lo}, {hi}]")
  edges = np.linspace(lo, hi, bins + 1)
  counts, underflow, overflow = {}, {}, {}
  for score_set in scores:
    label = score_set.source_label.value
    values = score_set.scores
    binned, _ = np.histogram(values, bins=edges)
    counts[label] = counts.get(label, np.zeros(bins, dtype=np.int64)) + binned
    underflow[label] = underflow.get(label, 0) + int(np.sum(values < lo))
    overflow[label] = overflow.get(label, 0) + int(np.sum(values > hi))
  return Histogram(edges, counts, underflow, overflow)


@dataclasses.dataclass(frozen=True)
class SummaryStats:
  length: int
  mean: float
  std: float
  min: float
  q1: float
  median: float
  q3: float
  max: float

  def to_dict(self) -> dict[str, float | int]:
    return dataclasses.asdict(self)


def summarize(scores) -> SummaryStats:
  """Five-number summary with mean and sample standard deviation.

  Quantiles interpolate linearly between order statistics at h = (n - 1) p.

  Raises:
      ShapeError: If there are no scores.
  """
  values = _score_values(scores)
  if values.size == 0:
    raise ShapeError("cannot summarize an empty score set")
  q1, median, q3 = np.quantile(values, [0.25, 0.5, 0.75], method="linear")
  return SummaryStats(
      length=int(values.size),
      mean=float(np.mean(values)),
      std=_sample_std(values),
      min=float(np.min(values)),
      q1=float(q1),
      median=float(median),
      q3=float(q3),
      max=float(np.max(values)),
  )


def stratified_summary(scores, labels: Sequence[str]) -> dict[str, SummaryStats]:
  """Summaries per label, keyed in lexicographic label order."""
  values = _score_values(scores)
  labels = np.asarray([str(label) for label in labels], dtype=object)
  if labels.shape[0] != values.size:
    raise ShapeError(f"{labels.shape[0]} labels for {values.size} scores")
  # Sorting within a stratum makes the result independent of input order.
  return {
      label: summarize(np.sort(values[labels == label]))
      for label in sorted(set(labels.tolist()))
  }


@dataclasses.dataclass(frozen=True)
class CoefficientRow:
  name: str
  coef: float
  std_error: float
  z: float
  p_value: float


@dataclasses.dataclass(frozen=True)
class AttributionReport:
  """Joint logistic regression of 1{score > threshold} on covariates.

  Attributes:
      rows: Covariate rows sorted by ascending p-value.
      intercept: The intercept row.
      converged: Whether the Newton steps fell below tolerance.
      iterations: Newton iterations used.
      separation: Whether the labels are (quasi-)completely separated,
          seen as a clamped coefficient, fitted probabilities that
          reproduce the labels or a linear predictor that splits them.
      threshold: Score threshold that defined the labels.
  """

  rows: list[CoefficientRow]
  intercept: CoefficientRow
  converged: bool
  iterations: int
  separation: bool
  threshold: float

  def coefficient(self, name: str) -> CoefficientRow:
    for row in [*self.rows, self.intercept]:
      if row.name == name:
        return row
    raise KeyError(name)

  def to_frame(self) -> pd.DataFrame:
    return pd.DataFrame([dataclasses.asdict(r)
                         for r in [*self.rows, self.intercept]])


def _collinear_columns(design: np.ndarray, names: list[str]) -> list[str]:
  kept, dropped = [], []
  for j in range(design.shape[1]):
    if np.linalg.matrix_rank(design[:, kept + [j]]) > len(kept):
      kept.append(j)
    else:
      dropped.append(names[j])
  return dropped


def _separated(design: np.ndarray, y: np.ndarray, beta: np.ndarray) -> bool:
  eta = design @ beta
  if np.all(np.abs(numerics.logistic(eta) - y) < SEPARATION_TOLERANCE):
    return True
  ones, zeros = eta[y == 1.0], eta[y == 0.0]
  if ones.size == 0 or zeros.size == 0:
    return True
  return bool(ones.min() > zeros.max())


def _penalized_newton_step(design, y, beta, ridge):
  mu = numerics.logistic(design @ beta)
  weights = mu * (1.0 - mu)
  gradient = design.T @ (y - mu) - ridge * beta
  information = (design * weights[:, None]).T @ design
  information[np.diag_indices_from(information)] += ridge
  return gradient, information


def logistic_attribution(
    scores,
    covariates: SampleMatrix,
    threshold: float = 1.0,
    ridge: float = RIDGE,
    max_iter: int = IRLS_MAX_ITER,
    tol: float = IRLS_TOLERANCE,
) -> AttributionReport:
  """Fits P(score > threshold) = logistic(b0 + x b) by Newton's method (IRLS).

  Args:
      scores: ScoreSet or vector with one score per covariate row.
      covariates: Covariate matrix; column names become row names.
      threshold: Scores above it are labelled 1.
      ridge: Penalty added to the information diagonal and the gradient.
      max_iter: Iteration cap.
      tol: Convergence threshold on the largest coefficient change.

  Returns:
      The fitted report with Wald statistics.

  Raises:
      ShapeError: If rows do not align.
      SingularSystemError: If the design is rank deficient.
  """
  values = _score_values(scores)
  if values.size != covariates.n_rows:
    raise ShapeError(
        f"{values.size} scores for {covariates.n_rows} covariate rows"
    )
  if values.size == 0:
    raise ShapeError("no rows to fit")
  y = (values > threshold).astype(np.float64)
  names = [INTERCEPT, *covariates.names]
  design = np.hstack([np.ones((values.size, 1)), covariates.values])
  if np.linalg.matrix_rank(design) < design.shape[1]:
    collinear = _collinear_columns(design, names)
    raise SingularSystemError(
        f"design matrix is rank deficient; collinear columns: {collinear}",
        columns=collinear,
    )

  beta = np.zeros(design.shape[1])
  converged, separation, iterations = False, False, 0
  for iterations in range(1, max_iter + 1):
    gradient, information = _penalized_newton_step(design, y, beta, ridge)
    step = numerics.solve_square(
        numerics.DenseSquareSystem(information, gradient))
    beta = beta + step
    if np.any(np.abs(beta) > COEF_LIMIT):
      separation = True
      beta = np.clip(beta, -COEF_LIMIT, COEF_LIMIT)
      logger.warning("separation detected; coefficients clamped at +/-%g",
                     COEF_LIMIT)
      break
    if np.max(np.abs(step)) <= tol:
      converged = True
      break
  if not separation and _separated(design, y, beta):
    separation = True
    logger.warning("separation detected; the linear predictor splits the "
                   "labels exactly")
  if not converged and not separation:
    logger.warning("logistic fit did not converge in %d iterations", max_iter)

  _, information = _penalized_newton_step(design, y, beta, ridge)
  covariance = scipy.linalg.inv(information)
  std_error = np.sqrt(np.maximum(np.diag(covariance), 0.0))
  with np.errstate(divide="ignore", invalid="ignore"):
    z = np.where(std_error > 0.0, beta / std_error, 0.0)
  p_value = np.clip(2.0 * scipy.stats.norm.sf(np.abs(z)), 0.0, 1.0)
  rows = [
      CoefficientRow(names[j], float(beta[j]), float(std_error[j]),
                     float(z[j]), float(p_value[j]))
      for j in range(design.shape[1])
  ]
  covariate_rows = sorted(rows[1:], key=lambda r: (r.p_value, r.name))
  return AttributionReport(
      rows=covariate_rows,
      intercept=rows[0],
      converged=converged,
      iterations=iterations,
      separation=separation,
      threshold=float(threshold),
  )


@dataclasses.dataclass(frozen=True)
class SpearmanResult:
  rho: float
  p_value: float
  n: int
  method: str = "t"


def _rank_correlation(rx: np.ndarray, ry: np.ndarray) -> float:
  dx = rx - rx.mean()
  dy = ry - ry.mean()
  rho = float(np.sum(dx * dy) / np.sqrt(np.sum(dx * dx) * np.sum(dy * dy)))
  return min(max(rho, -1.0), 1.0)


def spearman(x, y, method: str = "t", permutations: int = PERMUTATIONS,
             seed: int = 0) -> SpearmanResult:
  """Spearman rank correlation with average ranks for ties.

  Args:
      x: First vector.
      y: Second vector, same length (at least 3).
      method: `t` for the Student-t approximation with n - 2 degrees of
          freedom, `permutation` for a seeded Monte Carlo test (n <= 30).
      permutations: Permutation count for the Monte Carlo test.
      seed: Seed of the permutation stream.

  Returns:
      rho, its two-sided p-value and n.

  Raises:
      ShapeError: On length mismatch or fewer than 3 points.
      DomainError: If either input is constant.
  """
  x = np.asarray(x, dtype=np.float64).reshape(-1)
  y = np.asarray(y, dtype=np.float64).reshape(-1)
  if x.size != y.size:
    raise ShapeError(f"spearman inputs have lengths {x.size} and {y.size}")
  n = x.size
  if n < 3:
    raise ShapeError(f"spearman needs at least 3 points, got {n}")
  for name, v in (("x", x), ("y", y)):
    if np.all(v == v[0]):
      raise DomainError(f"{name} is constant; rank correlation is undefined")
  rx = scipy.stats.rankdata(x, method="average")
  ry = scipy.stats.rankdata(y, method="average")
  rho = _rank_correlation(rx, ry)

  if method == "t":
    if abs(rho) >= 1.0:
      return SpearmanResult(rho, 0.0, n, method)
    t = rho * np.sqrt((n - 2) / (1.0 - rho * rho))
    p = float(2.0 * scipy.stats.t.sf(abs(t), df=n - 2))
    return SpearmanResult(rho, min(max(p, 0.0), 1.0), n, method)
  if method != "permutation":
    raise ConfigError(f"unknown spearman method: {method}")
  if n > PERMUTATION_MAX_N:
    raise ConfigError(
        f"permutation p-values are limited to n <= {PERMUTATION_MAX_N}, got {n}"
    )
  rng = numerics.RngState(seed)
  hits = 0
  for _ in range(permutations):
    shuffled = ry[numerics.rng_permutation(rng, n)]
    if abs(_rank_correlation(rx, shuffled)) >= abs(rho) - 1e-12:
      hits += 1
  return SpearmanResult(rho, (1 + hits) / (1 + permutations), n, method)


@dataclasses.dataclass(frozen=True)
class CompositionTable:
  """Relative abundances: nonnegative rows summing to 1."""

  matrix: SampleMatrix

  def __post_init__(self):
    values = self.matrix.values
    if np.any(values < 0.0):
      row, col = np.argwhere(values < 0.0)[0]
      raise DomainError(
          f"negative abundance at row {row}, column {self.matrix.names[col]}"
      )
    sums = values.sum(axis=1)
    bad = np.flatnonzero(np.abs(sums - 1.0) > COMPOSITION_TOLERANCE)
    if bad.size:
      raise DomainError(
          f"row {int(bad[0])} sums to {sums[bad[0]]!r}, not 1"
      )

  @classmethod
  def from_counts(cls, counts: SampleMatrix) -> "CompositionTable":
    """Normalizes nonnegative count rows to relative abundances."""
    values = counts.values
    if np.any(values < 0.0):
      raise DomainError("counts must be nonnegative")
    totals = values.sum(axis=1, keepdims=True)
    if np.any(totals <= 0.0):
      raise DomainError(f"row {int(np.flatnonzero(totals <= 0)[0])} is empty")
    return cls(SampleMatrix(values / totals, counts.names))

  @property
  def names(self) -> tuple[str, ...]:
    return self.matrix.names

  @property
  def values(self) -> np.ndarray:
    return self.matrix.values


def clr_transform(table: CompositionTable,
                  pseudocount: float = CLR_PSEUDOCOUNT) -> SampleMatrix:
  """Centered log-ratio of each row after adding a pseudocount."""
  if pseudocount < 0.0:
    raise DomainError(f"pseudocount must be nonnegative, got {pseudocount}")
  z = table.values + pseudocount
  z = z / z.sum(axis=1, keepdims=True)
  with np.errstate(divide="ignore"):
    logs = np.log(z)
  if not np.all(np.isfinite(logs)):
    raise DomainError("zero abundance with no pseudocount")
  return SampleMatrix(logs - logs.mean(axis=1, keepdims=True), table.names)


def aggregate_groups(table: CompositionTable,
                     mapping: Mapping[str, str]) -> CompositionTable:
  """Sums member columns into groups, in order of first appearance."""
  missing = [name for name in table.names if name not in mapping]
  if missing:
    raise DataError(f"columns without a group: {missing}")
  groups = list(dict.fromkeys(mapping[name] for name in table.names))
  members = np.array([mapping[name] for name in table.names], dtype=object)
  values = np.column_stack(
      [table.values[:, members == g].sum(axis=1) for g in groups])
  return CompositionTable(SampleMatrix(values, groups))


@dataclasses.dataclass(frozen=True)
class AssociationRow:
  level: str
  group: str
  rho: float
  p_value: float
  n: int


def association_scan(
    scores,
    table: CompositionTable,
    mappings: Mapping[str, Mapping[str, str] | None],
    pseudocount: float = CLR_PSEUDOCOUNT,
) -> dict[str, list[AssociationRow]]:
  """Spearman association between scores and each aggregated CLR feature.

  For every level: aggregate the table with that level's mapping (None keeps
  the columns), CLR-transform, and correlate each group with the scores.

  Args:
      scores: One ScoreSet, a sequence of ScoreSets stacked in order, or a
          vector aligned with the table rows.
      table: Compositions, one row per score.
      mappings: Level name to column-to-group mapping.
      pseudocount: Added before the log ratio.

  Returns:
      Level name to rows sorted by descending |rho|.
  """
  if isinstance(scores, (list, tuple)) and scores and isinstance(
      scores[0], ScoreSet):
    values = np.concatenate([s.scores for s in scores])
  else:
    values = _score_values(scores)
  if values.size != table.matrix.n_rows:
    raise ShapeError(
        f"{values.size} scores for {table.matrix.n_rows} composition rows"
    )
  results = {}
  for level, mapping in mappings.items():
    grouped = table if mapping is None else aggregate_groups(table, mapping)
    transformed = clr_transform(grouped, pseudocount)
    rows = []
    for j, group in enumerate(transformed.names):
      column = transformed.values[:, j]
      if np.all(column == column[0]):
        logger.warning("level %s: group %s is constant after CLR; skipped",
                       level, group)
        continue
      result = spearman(values, column)
      rows.append(AssociationRow(level, group, result.rho, result.p_value,
                                 result.n))
    rows.sort(key=lambda r: -abs(r.rho))
    results[level] = rows
  return results


@dataclasses.dataclass(frozen=True)
class SupportGap:
  generated_below: int
  generated_below_fraction: float
  real_above: int
  real_above_fraction: float


def support_gap(real: ScoreSet, generated: ScoreSet) -> SupportGap:
  """Generated scores below every real score, and real scores above every
  generated score."""
  r, g = _score_values(real), _score_values(generated)
  if r.size == 0 or g.size == 0:
    raise ShapeError("support_gap needs two nonempty score sets")
  below = int(np.sum(g < r.min()))
  above = int(np.sum(r > g.max()))
  return SupportGap(below, below / g.size, above, above / r.size)


@dataclasses.dataclass(frozen=True)
class ExtremeSamples:
  lowest: list[tuple[str, float]]
  neutral: list[tuple[str, float]]
  highest: list[tuple[str, float]]


def extreme_samples(scores: ScoreSet, k: int = 5) -> ExtremeSamples:
  """The k lowest, k closest to 1 and k highest scores with their ids."""
  if k < 1:
    raise ConfigError(f"k must be at least 1, got {k}")
  values, ids = scores.scores, scores.ids()

  def pick(order):
    return [(ids[i], float(values[i])) for i in order[:k]]

  ascending = np.argsort(values, kind="stable")
  return ExtremeSamples(
      lowest=pick(ascending),
      neutral=pick(np.argsort(np.abs(values - 1.0), kind="stable")),
      highest=pick(ascending[::-1]),
  )


@dataclasses.dataclass(frozen=True)
class CoverageFidelity:
  uncovered_real_mass: float
  low_fidelity_generated_mass: float
  tol: float


def coverage_fidelity(real: ScoreSet, generated: ScoreSet,
                      tol: float = 0.1) -> CoverageFidelity:
  """Real mass at r >= 2 - tol and generated mass at r <= tol."""
  r, g = _score_values(real), _score_values(generated)
  if r.size == 0 or g.size == 0:
    raise ShapeError("coverage_fidelity needs two nonempty score sets")
  return CoverageFidelity(
      uncovered_real_mass=float(np.mean(r >= 2.0 - tol)),
      low_fidelity_generated_mass=float(np.mean(g <= tol)),
      tol=float(tol),
  )
