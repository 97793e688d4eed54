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

"""One-dimensional benchmark scenarios with closed-form oracles.

Two families are available:

  gauss_shift(delta)  P = N(0, 1), Q = N(delta, 1).
  beta_mixture(case)  P and Q are equal-or-reweighted mixtures of Beta
                      densities on [0, 1]; each case drops or reweights one
                      of three modes (see `_BETA_CASES`).

Every scenario knows its densities, its exact ratios, a trapezoid grid that
covers both densities, and the squared Hellinger distances those give.
"""

import dataclasses
import enum
import logging
from typing import Callable

from rdr_eval import divergence
from rdr_eval import numerics
from rdr_eval.errors import ConfigError
from rdr_eval.errors import DomainError
from rdr_eval.estimator import Mode

import numpy as np
import pandas as pd
import scipy.integrate
import scipy.stats

logger = logging.getLogger(__name__)

GAUSS_GRID_MARGIN = 12.0
GAUSS_GRID_POINTS = 100_000
BETA_GRID_POINTS = 200_001
BETA_GRID_EDGE = 1e-9
ORACLE_POINTS = 500
PUSHFORWARD_BINS = 200


class Kind(enum.Enum):
  GAUSS_SHIFT = "gauss_shift"
  BETA_MIXTURE = "beta_mixture"


class BetaCase(enum.Enum):
  PARTIAL_PRECISION = "partial_precision"
  PARTIAL_RECALL = "partial_recall"
  MODE_REWEIGHT = "mode_reweight"


class Denominator(enum.Enum):
  Q = "q"
  MIXTURE = "mixture"


@dataclasses.dataclass(frozen=True)
class BetaComponent:
  weight: float
  a: float
  b: float


_THREE_MODES = (
    BetaComponent(1 / 3, 5, 45),
    BetaComponent(1 / 3, 25, 25),
    BetaComponent(1 / 3, 45, 5),
)
_TWO_MODES = (BetaComponent(0.5, 5, 45), BetaComponent(0.5, 25, 25))
_SHIFTED_MODES = (
    BetaComponent(0.6, 2, 48),
    BetaComponent(0.3, 25, 25),
    BetaComponent(0.1, 48, 2),
)

# (components of P, components of Q) per case.
_BETA_CASES = {
    BetaCase.PARTIAL_PRECISION: (_THREE_MODES, _TWO_MODES),
    BetaCase.PARTIAL_RECALL: (_TWO_MODES, _THREE_MODES),
    BetaCase.MODE_REWEIGHT: (_THREE_MODES, _SHIFTED_MODES),
}


def _normalize(name: str) -> str:
  return name.strip().lower().replace("-", "_")


@dataclasses.dataclass(frozen=True)
class QuadratureGrid:
  """Trapezoid rule on `points` evenly spaced nodes of [lo, hi]."""

  lo: float
  hi: float
  points: int = GAUSS_GRID_POINTS

  def __post_init__(self):
    if self.points < 2 or not self.lo < self.hi:
      raise DomainError(
          f"grid needs lo < hi and at least 2 points, got [{self.lo},"
          f" {self.hi}] with {self.points}"
      )

  def nodes(self) -> np.ndarray:
    return np.linspace(self.lo, self.hi, self.points)

  def integrate(self, values: np.ndarray) -> float:
    return float(scipy.integrate.trapezoid(values, self.nodes()))


@dataclasses.dataclass(frozen=True)
class Scenario:
  """A pair of 1-D densities P (real) and Q (generated)."""

  kind: Kind
  delta: float = 0.0
  case: BetaCase | None = None

  def __post_init__(self):
    object.__setattr__(self, "kind", Kind(self.kind))
    if self.kind is Kind.GAUSS_SHIFT:
      if not np.isfinite(self.delta):
        raise ConfigError(f"delta must be finite, got {self.delta}")
      object.__setattr__(self, "delta", float(self.delta))
      object.__setattr__(self, "case", None)
    else:
      if self.case is None:
        raise ConfigError("a beta_mixture scenario needs a case")
      object.__setattr__(self, "case", BetaCase(self.case))

  @classmethod
  def gauss_shift(cls, delta: float) -> "Scenario":
    return cls(Kind.GAUSS_SHIFT, delta=delta)

  @classmethod
  def beta_mixture(cls, case: BetaCase | str) -> "Scenario":
    if isinstance(case, str):
      case = _normalize(case)
    return cls(Kind.BETA_MIXTURE, case=BetaCase(case))

  @classmethod
  def parse(cls, kind: str, delta: float | None = None,
            case: str | None = None) -> "Scenario":
    """Builds a scenario from command-line style names such as gauss-shift."""
    try:
      parsed = Kind(_normalize(kind))
      if parsed is Kind.GAUSS_SHIFT:
        if delta is None:
          raise ConfigError("gauss-shift needs --delta")
        return cls.gauss_shift(delta)
      if case is None:
        raise ConfigError("beta-mixture needs --case")
      return cls.beta_mixture(case)
    except ValueError as e:
      if isinstance(e, ConfigError):
        raise
      raise ConfigError(f"unknown scenario: {e}") from e

  @property
  def name(self) -> str:
    if self.kind is Kind.GAUSS_SHIFT:
      return f"gauss_shift(delta={self.delta!r})"
    return f"beta_mixture({self.case.value})"

  def components(self) -> tuple[tuple[BetaComponent, ...],
                                tuple[BetaComponent, ...]]:
    if self.kind is not Kind.BETA_MIXTURE:
      raise ConfigError(f"{self.name} has no Beta components")
    return _BETA_CASES[self.case]

  def grid(self) -> QuadratureGrid:
    if self.kind is Kind.GAUSS_SHIFT:
      return QuadratureGrid(
          min(0.0, self.delta) - GAUSS_GRID_MARGIN,
          max(0.0, self.delta) + GAUSS_GRID_MARGIN,
          GAUSS_GRID_POINTS,
      )
    return QuadratureGrid(BETA_GRID_EDGE, 1.0 - BETA_GRID_EDGE,
                          BETA_GRID_POINTS)

  def plot_range(self) -> tuple[float, float]:
    if self.kind is Kind.GAUSS_SHIFT:
      return min(0.0, self.delta) - 6.0, max(0.0, self.delta) + 6.0
    return BETA_GRID_EDGE, 1.0 - BETA_GRID_EDGE


def _as_points(x) -> tuple[np.ndarray, bool]:
  values = np.asarray(x, dtype=np.float64)
  if not np.all(np.isfinite(values)):
    raise DomainError("density arguments must be finite")
  return values, values.ndim == 0


def _unwrap(values: np.ndarray, scalar: bool):
  return float(values) if scalar else values


def _mixture_pdf(components: tuple[BetaComponent, ...],
                 x: np.ndarray) -> np.ndarray:
  out = np.zeros_like(x, dtype=np.float64)
  for c in components:
    out = out + c.weight * scipy.stats.beta.pdf(x, c.a, c.b)
  return out


def _pdf_p(scenario: Scenario, x: np.ndarray) -> np.ndarray:
  if scenario.kind is Kind.GAUSS_SHIFT:
    return scipy.stats.norm.pdf(x)
  return _mixture_pdf(scenario.components()[0], x)


def _pdf_q(scenario: Scenario, x: np.ndarray) -> np.ndarray:
  if scenario.kind is Kind.GAUSS_SHIFT:
    return scipy.stats.norm.pdf(x, loc=scenario.delta)
  return _mixture_pdf(scenario.components()[1], x)


def density_p(scenario: Scenario, x):
  """Density of P at x (scalar or array)."""
  values, scalar = _as_points(x)
  return _unwrap(np.asarray(_pdf_p(scenario, values)), scalar)


def density_q(scenario: Scenario, x):
  """Density of Q at x (scalar or array)."""
  values, scalar = _as_points(x)
  return _unwrap(np.asarray(_pdf_q(scenario, values)), scalar)


def analytic_rdr(scenario: Scenario, x):
  """The relative density ratio 2p / (p + q) at x.

  Raises:
      DomainError: If p(x) + q(x) = 0 at some point.
  """
  values, scalar = _as_points(x)
  if scenario.kind is Kind.GAUSS_SHIFT:
    d = scenario.delta
    # 2 / (1 + exp(d x - d^2 / 2)) without overflow.
    r = 2.0 * np.asarray(numerics.logistic(-(d * values - 0.5 * d * d)))
    return _unwrap(r, scalar)
  p, q = _pdf_p(scenario, values), _pdf_q(scenario, values)
  total = p + q
  if np.any(total <= 0.0):
    point = np.atleast_1d(values)[np.flatnonzero(np.atleast_1d(total) <= 0)[0]]
    raise DomainError(f"p + q vanishes at x = {point!r}")
  return _unwrap(np.asarray(2.0 * p / total), scalar)


def analytic_dr(scenario: Scenario, x):
  """The density ratio p / q at x.

  Raises:
      DomainError: If q(x) = 0 at some point.
  """
  values, scalar = _as_points(x)
  if scenario.kind is Kind.GAUSS_SHIFT:
    d = scenario.delta
    # Closed form; the densities themselves underflow for large shifts.
    with np.errstate(over="ignore"):
      g = np.exp(-d * values + 0.5 * d * d)
    return _unwrap(np.asarray(g), scalar)
  p, q = _pdf_p(scenario, values), _pdf_q(scenario, values)
  if np.any(q <= 0.0):
    point = np.atleast_1d(values)[np.flatnonzero(np.atleast_1d(q) <= 0)[0]]
    raise DomainError(f"q vanishes at x = {point!r}")
  with np.errstate(over="ignore"):
    return _unwrap(np.asarray(p / q), scalar)


def total_mass(scenario: Scenario) -> tuple[float, float]:
  """Quadrature integrals of p and q over the scenario grid."""
  grid = scenario.grid()
  nodes = grid.nodes()
  return (grid.integrate(_pdf_p(scenario, nodes)),
          grid.integrate(_pdf_q(scenario, nodes)))


def quadrature_h2(scenario: Scenario,
                  denominator: Denominator | str = Denominator.MIXTURE
                 ) -> float:
  """H^2(P, D) = 1 - integral sqrt(p d) by trapezoid on the scenario grid.

  Args:
      scenario: The scenario.
      denominator: `q` for D = Q, `mixture` for D = (P + Q) / 2.

  Returns:
      The squared Hellinger distance.
  """
  denominator = Denominator(denominator)
  grid = scenario.grid()
  nodes = grid.nodes()
  p = _pdf_p(scenario, nodes)
  q = _pdf_q(scenario, nodes)
  den = q if denominator is Denominator.Q else 0.5 * (p + q)
  return 1.0 - grid.integrate(np.sqrt(p * den))


def population_balancing_loss(
    scenario: Scenario,
    ratio: Callable[[np.ndarray], np.ndarray] | None = None,
    alpha: float = 0.0,
) -> float:
  """Balancing loss under the true distributions, by quadrature.

  1/2 integral p g^(-1/2) + 1/2 integral (alpha p + (1 - alpha) q) g^(1/2).

  Args:
      scenario: The scenario.
      ratio: Ratio function evaluated on the grid nodes; defaults to the true
          ratio p / (alpha p + (1 - alpha) q), infinite where the mixture
          vanishes.
      alpha: Weight of P in the denominator mixture.

  Returns:
      The loss; at the true ratio it equals 1 - H^2(P, mixture).
  """
  grid = scenario.grid()
  nodes = grid.nodes()
  p = _pdf_p(scenario, nodes)
  den = alpha * p + (1.0 - alpha) * _pdf_q(scenario, nodes)
  with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
    g = p / den if ratio is None else np.asarray(ratio(nodes), np.float64)
    inverse = np.where(p > 0.0, p / np.sqrt(g), 0.0)
    direct = np.where(den > 0.0, den * np.sqrt(g), 0.0)
  return 0.5 * grid.integrate(inverse) + 0.5 * grid.integrate(direct)


def _gamma_integer(rng: numerics.RngState, shape: int, n: int) -> np.ndarray:
  # Gamma(k, 1) with integer k is a sum of k unit exponentials.
  u = numerics.rng_uniform(rng, n * shape).reshape(n, shape)
  return -np.log1p(-u).sum(axis=1)


def _beta_johnk(rng: numerics.RngState, a: float, b: float,
                n: int) -> np.ndarray:
  out = np.empty(n)
  pending = np.arange(n)
  while pending.size:
    u = numerics.rng_uniform(rng, 2 * pending.size).reshape(-1, 2)
    x = u[:, 0] ** (1.0 / a)
    y = u[:, 1] ** (1.0 / b)
    total = x + y
    ok = (total <= 1.0) & (total > 0.0)
    out[pending[ok]] = x[ok] / total[ok]
    pending = pending[~ok]
  return out


def _sample_beta(rng: numerics.RngState, a: float, b: float,
                 n: int) -> np.ndarray:
  if n == 0:
    return np.zeros(0)
  if float(a).is_integer() and float(b).is_integer():
    ga = _gamma_integer(rng, int(a), n)
    gb = _gamma_integer(rng, int(b), n)
    return ga / (ga + gb)
  return _beta_johnk(rng, a, b, n)


def _sample_mixture(rng: numerics.RngState,
                    components: tuple[BetaComponent, ...],
                    n: int) -> np.ndarray:
  weights = np.array([c.weight for c in components])
  edges = np.cumsum(weights / weights.sum())
  labels = np.searchsorted(edges, numerics.rng_uniform(rng, n), side="right")
  labels = np.minimum(labels, len(components) - 1)
  out = np.empty(n)
  for k, c in enumerate(components):
    rows = np.flatnonzero(labels == k)
    out[rows] = _sample_beta(rng, c.a, c.b, rows.size)
  return out


def _draw(scenario: Scenario, rng: numerics.RngState, n: int,
          from_p: bool) -> np.ndarray:
  if scenario.kind is Kind.GAUSS_SHIFT:
    shift = 0.0 if from_p else scenario.delta
    return shift + numerics.rng_normal(rng, n)
  p_components, q_components = scenario.components()
  return _sample_mixture(rng, p_components if from_p else q_components, n)


def sample(
    scenario: Scenario, n_p: int, n_q: int, rng: numerics.RngState
) -> tuple[numerics.SampleMatrix, numerics.SampleMatrix]:
  """Draws n_p points from P, then n_q points from Q, as 1-column samples."""
  if n_p < 1 or n_q < 1:
    raise ConfigError(f"sample sizes must be positive, got {n_p} and {n_q}")
  xp = _draw(scenario, rng, n_p, from_p=True)
  xq = _draw(scenario, rng, n_q, from_p=False)
  return (numerics.SampleMatrix(xp, ("x",)),
          numerics.SampleMatrix(xq, ("x",)))


def oracle_table(scenario: Scenario,
                 points: int = ORACLE_POINTS) -> pd.DataFrame:
  """Densities and exact ratios on an evenly spaced plotting grid."""
  lo, hi = scenario.plot_range()
  x = np.linspace(lo, hi, points)
  return pd.DataFrame({
      "x": x,
      "p": density_p(scenario, x),
      "q": density_q(scenario, x),
      "g": analytic_dr(scenario, x),
      "r": analytic_rdr(scenario, x),
  })


def _discrete_h2(a: np.ndarray, b: np.ndarray) -> float:
  a = a / a.sum()
  b = b / b.sum()
  return float(1.0 - np.sum(np.sqrt(a * b)))


def pushforward_h2(scenario: Scenario, model, n_mc: int = 100_000,
                   bins: int = PUSHFORWARD_BINS, seed: int = 0) -> float:
  """H^2 between the score distributions of P and of (P + Q) / 2.

  Draws n_mc points from P and n_mc from the equal mixture, scores both with
  `model` (relative-ratio space), and compares their `bins`-bin histograms
  on [0, 2].

  Args:
      scenario: A 1-D scenario.
      model: A fitted ratio model with a `scores` method.
      n_mc: Draws per side.
      bins: Histogram bins.
      seed: Seed for the Monte Carlo draws.

  Returns:
      The discrete squared Hellinger distance between the two histograms.
  """
  rng = numerics.RngState(seed)
  xp = _draw(scenario, rng, n_mc, from_p=True)
  from_p = numerics.rng_uniform(rng, n_mc) < 0.5
  mixture = np.empty(n_mc)
  n_from_p = int(from_p.sum())
  mixture[from_p] = _draw(scenario, rng, n_from_p, from_p=True)
  mixture[~from_p] = _draw(scenario, rng, n_mc - n_from_p, from_p=False)

  def to_rdr(values: np.ndarray) -> np.ndarray:
    scores = model.scores(values[:, None])
    if model.mode is Mode.DR:
      return divergence.rdr_from_dr(scores)
    return scores

  counts_p, _ = np.histogram(to_rdr(xp), bins=bins, range=(0.0, 2.0))
  counts_m, _ = np.histogram(to_rdr(mixture), bins=bins, range=(0.0, 2.0))
  h2 = _discrete_h2(counts_p.astype(float), counts_m.astype(float))
  logger.info("pushforward H^2 of %s: %.6f", scenario.name, h2)
  return h2
