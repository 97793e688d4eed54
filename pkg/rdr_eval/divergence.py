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

"""Variational phi-divergence objectives and the balancing loss.

The squared Hellinger distance between P and a mixture Q~ = aP + (1 - a)Q has
the variational form

  H^2 = 1 - min_g { 1/2 E_P[g^(-1/2)] + 1/2 E_Q~[g^(1/2)] },

minimized at g = dP/dQ~. With a = 0 the minimizer is the density ratio p/q;
with a = 1/2 it is the relative density ratio r = 2p/(p + q). The value of
the minimized objective is the balancing loss, and 1 - loss estimates H^2.

Sample means can be replaced by weighted means (`weights_p`, `weights_q`),
which turns every loss here into its population value under a quadrature
rule.
"""

import dataclasses
import enum
import logging
import math
from typing import Sequence

from rdr_eval.errors import DomainError
from rdr_eval.errors import ShapeError

import numpy as np

logger = logging.getLogger(__name__)

# Bounds applied to plain density ratios before loss evaluation.
G_MIN = 1e-4
G_MAX = 1e4
# Floor applied to relative density ratios before loss evaluation.
R_FLOOR = 1e-6
# Largest exponent accepted by the KL objective before clamping.
KL_EXPONENT_LIMIT = 700.0


class Objective(enum.Enum):
  """Variational objectives available for ratio fitting."""

  HELLINGER_SQ = "hellinger_sq"
  KL = "kl"
  CHI_SQ = "chi_sq"


@dataclasses.dataclass(frozen=True)
class MixtureWeight:
  """Weight of P in the denominator mixture a * P + (1 - a) * Q."""

  alpha: float = 0.5

  def __post_init__(self):
    if not 0.0 <= self.alpha < 1.0:
      raise DomainError(f"mixture weight must lie in [0, 1), got {self.alpha}")

  @property
  def cap(self) -> float:
    """Largest attainable H^2, reached at disjoint support."""
    return hellinger_cap(self.alpha)


def hellinger_cap(alpha: float) -> float:
  """Returns H^2(P, aP + (1 - a)Q) for P, Q with disjoint supports."""
  return 1.0 - math.sqrt(alpha)


@dataclasses.dataclass(frozen=True)
class LossReport:
  """Empirical balancing loss and the squared Hellinger estimate it implies."""

  loss: float
  h2_raw: float
  h2_clipped: float
  cap: float
  n_p: int
  n_q: int

  def to_dict(self) -> dict[str, float | int]:
    return dataclasses.asdict(self)


def make_report(loss: float, n_p: int, n_q: int, alpha: float) -> LossReport:
  """Builds a LossReport, clipping Ĥ² into [0, cap] for display only."""
  cap = hellinger_cap(alpha)
  h2_raw = 1.0 - loss
  return LossReport(
      loss=float(loss),
      h2_raw=float(h2_raw),
      h2_clipped=float(min(max(h2_raw, 0.0), cap)),
      cap=cap,
      n_p=int(n_p),
      n_q=int(n_q),
  )


def _as_ratio_vector(values, name: str) -> np.ndarray:
  g = np.asarray(values, dtype=np.float64).reshape(-1)
  if g.size == 0:
    raise ShapeError(f"{name} is empty")
  bad = np.flatnonzero(~np.isfinite(g) | (g <= 0.0))
  if bad.size:
    i = int(bad[0])
    raise DomainError(
        f"{name}[{i}] = {g[i]!r} is not a strictly positive finite ratio"
    )
  return g


def _as_weights(weights, size: int, name: str) -> np.ndarray | None:
  if weights is None:
    return None
  w = np.asarray(weights, dtype=np.float64).reshape(-1)
  if w.shape != (size,):
    raise ShapeError(f"{name} has shape {w.shape}, expected ({size},)")
  if np.any(w < 0.0) or not np.isfinite(w).all() or w.sum() <= 0.0:
    raise DomainError(f"{name} must be nonnegative, finite and not all zero")
  return w / w.sum()


def _mean(values: np.ndarray, weights: np.ndarray | None) -> float:
  if weights is None:
    return float(np.mean(values))
  return float(np.sum(weights * values))


def mixture_balancing_loss(
    components: Sequence[np.ndarray],
    weights: Sequence[float],
    numerator: int,
    sample_weights: Sequence[np.ndarray | None] | None = None,
) -> float:
  """Balancing loss with a general mixture in the denominator.

  loss = 1/2 mean_num g^(-1/2) + 1/2 sum_k w_k mean_k g^(1/2), where
  `components[k]` holds the ratio evaluated on a batch of sample k and the
  numerator batch is `components[numerator]`.

  Args:
      components: Ratio values on each sample's batch.
      weights: Mixture weights, one per component, summing to 1.
      numerator: Index of the numerator sample.
      sample_weights: Optional per-component observation weights.

  Returns:
      The loss value.
  """
  if len(components) != len(weights):
    raise ShapeError(
        f"{len(components)} components for {len(weights)} mixture weights"
    )
  sample_weights = sample_weights or [None] * len(components)
  gs = [_as_ratio_vector(g, f"g[{k}]") for k, g in enumerate(components)]
  ws = [_as_weights(w, g.size, f"weights[{k}]")
        for k, (g, w) in enumerate(zip(gs, sample_weights))]
  mixture = 0.0
  for k, g in enumerate(gs):
    mixture += weights[k] * _mean(np.sqrt(g), ws[k])
  inverse = _mean(1.0 / np.sqrt(gs[numerator]), ws[numerator])
  return 0.5 * inverse + 0.5 * mixture


def mixture_balancing_loss_grad(
    components: Sequence[np.ndarray],
    weights: Sequence[float],
    numerator: int,
) -> list[np.ndarray]:
  """Gradient of `mixture_balancing_loss` with respect to each component."""
  gs = [_as_ratio_vector(g, f"g[{k}]") for k, g in enumerate(components)]
  grads = [weights[k] * 0.25 / np.sqrt(g) / g.size for k, g in enumerate(gs)]
  g_num = gs[numerator]
  grads[numerator] = grads[numerator] - 0.25 * g_num**-1.5 / g_num.size
  return grads


def balancing_loss(
    g_at_p,
    g_at_q,
    weight: MixtureWeight = MixtureWeight(),
    weights_p=None,
    weights_q=None,
) -> LossReport:
  """Empirical balancing loss of a ratio evaluated on both samples.

  Args:
      g_at_p: Ratio values at the P sample.
      g_at_q: Ratio values at the Q sample.
      weight: Mixture weight of P in the denominator.
      weights_p: Optional observation weights for the P values.
      weights_q: Optional observation weights for the Q values.

  Returns:
      The loss together with Ĥ² = 1 - loss.

  Raises:
      DomainError: If a ratio value is not strictly positive and finite.
  """
  g_at_p = np.asarray(g_at_p, dtype=np.float64).reshape(-1)
  g_at_q = np.asarray(g_at_q, dtype=np.float64).reshape(-1)
  loss = mixture_balancing_loss(
      [g_at_p, g_at_q],
      [weight.alpha, 1.0 - weight.alpha],
      numerator=0,
      sample_weights=[weights_p, weights_q],
  )
  return make_report(loss, g_at_p.size, g_at_q.size, weight.alpha)


def balancing_loss_grad(
    g_at_p, g_at_q, weight: MixtureWeight = MixtureWeight()
) -> tuple[np.ndarray, np.ndarray]:
  """Analytic gradient of the balancing loss with respect to each value."""
  grad_p, grad_q = mixture_balancing_loss_grad(
      [g_at_p, g_at_q], [weight.alpha, 1.0 - weight.alpha], numerator=0
  )
  return grad_p, grad_q


def rdr_from_dr(g):
  """Maps a density ratio g in [0, inf) to the relative ratio 2g / (g + 1)."""
  g_arr = np.asarray(g, dtype=np.float64)
  if np.any(~np.isfinite(g_arr) | (g_arr < 0.0)):
    raise DomainError("density ratio must be finite and nonnegative")
  r = 2.0 * g_arr / (g_arr + 1.0)
  return float(r) if r.ndim == 0 else r


def dr_from_rdr(r):
  """Maps a relative ratio r in [0, 2) back to the density ratio r / (2 - r)."""
  r_arr = np.asarray(r, dtype=np.float64)
  bad = ~np.isfinite(r_arr) | (r_arr < 0.0) | (r_arr >= 2.0)
  if np.any(bad):
    value = r_arr[bad].reshape(-1)[0]
    raise DomainError(f"relative ratio {value!r} lies outside [0, 2)")
  g = r_arr / (2.0 - r_arr)
  return float(g) if g.ndim == 0 else g


def implied_dr(r: np.ndarray,
               alpha: float) -> tuple[np.ndarray, np.ndarray]:
  """Density ratio against the rest of the mixture implied by r.

  With r = p / (alpha p + (1 - alpha) q) the ratio p / q is
  g = (1 - alpha) r / (1 - alpha r). Values with r >= 1 / alpha map to +inf.

  Returns:
      g and its derivative dg/dr (0 where g is infinite).
  """
  r = np.asarray(r, dtype=np.float64)
  denom = 1.0 - alpha * r
  inside = denom > 0.0
  safe = np.where(inside, denom, 1.0)
  g = np.where(inside, (1.0 - alpha) * r / safe, np.inf)
  slope = np.where(inside, (1.0 - alpha) / (safe * safe), 0.0)
  return g, slope


def clamp_dr(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
  """Clamps density ratios into [G_MIN, G_MAX].

  Returns:
      The clamped values and a mask of entries left untouched (where the
      clamp passes gradients through).
  """
  clamped = np.clip(g, G_MIN, G_MAX)
  return clamped, (g >= G_MIN) & (g <= G_MAX)


def floor_rdr(r: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
  """Floors relative ratios at R_FLOOR; returns values and pass-through mask."""
  return np.maximum(r, R_FLOOR), r >= R_FLOOR


@dataclasses.dataclass(frozen=True)
class VariationalLoss:
  """Negated variational objective and whether its exponent was clamped."""

  loss: float
  clamped: bool = False

  def __float__(self) -> float:
    return self.loss


def _clamped_exp(f: np.ndarray) -> tuple[np.ndarray, bool]:
  exponent = f - 1.0
  clamped = bool(np.any(exponent > KL_EXPONENT_LIMIT))
  if clamped:
    logger.warning(
        "KL exponent exceeds %s; clamping %d values",
        KL_EXPONENT_LIMIT,
        int(np.sum(exponent > KL_EXPONENT_LIMIT)),
    )
  return np.exp(np.minimum(exponent, KL_EXPONENT_LIMIT)), clamped


def kl_variational_loss(
    f_at_p, f_at_q, weights_p=None, weights_q=None
) -> VariationalLoss:
  """Returns -(E_P[f] - E_Q[exp(f - 1)]), minimized at f = 1 + log(p / q)."""
  f_p = np.asarray(f_at_p, dtype=np.float64).reshape(-1)
  f_q = np.asarray(f_at_q, dtype=np.float64).reshape(-1)
  exp_q, clamped = _clamped_exp(f_q)
  value = _mean(f_p, _as_weights(weights_p, f_p.size, "weights_p")) - _mean(
      exp_q, _as_weights(weights_q, f_q.size, "weights_q")
  )
  return VariationalLoss(loss=-value, clamped=clamped)


def chisq_variational_loss(
    f_at_p, f_at_q, weights_p=None, weights_q=None
) -> VariationalLoss:
  """Returns -(E_P[f] - E_Q[f^2 / 4 + f]), minimized at f = 2(p / q - 1)."""
  f_p = np.asarray(f_at_p, dtype=np.float64).reshape(-1)
  f_q = np.asarray(f_at_q, dtype=np.float64).reshape(-1)
  value = _mean(f_p, _as_weights(weights_p, f_p.size, "weights_p")) - _mean(
      f_q * f_q / 4.0 + f_q, _as_weights(weights_q, f_q.size, "weights_q")
  )
  return VariationalLoss(loss=-value)


def variational_loss_grad(
    objective: Objective, f_at_p, f_at_q
) -> tuple[np.ndarray, np.ndarray]:
  """Gradient of the KL or chi-squared loss with respect to each value."""
  f_p = np.asarray(f_at_p, dtype=np.float64).reshape(-1)
  f_q = np.asarray(f_at_q, dtype=np.float64).reshape(-1)
  grad_p = np.full(f_p.shape, -1.0 / f_p.size)
  if objective is Objective.KL:
    exp_q, _ = _clamped_exp(f_q)
    exp_q = np.where(f_q - 1.0 > KL_EXPONENT_LIMIT, 0.0, exp_q)
    return grad_p, exp_q / f_q.size
  if objective is Objective.CHI_SQ:
    return grad_p, (f_q / 2.0 + 1.0) / f_q.size
  raise DomainError(f"no variational gradient for {objective.value}")


def kl_ratio(f):
  """Recovers the density ratio exp(f - 1) from a KL critic."""
  return np.exp(np.minimum(np.asarray(f, dtype=np.float64) - 1.0,
                           KL_EXPONENT_LIMIT))


def chisq_ratio(f):
  """Recovers the density ratio f / 2 + 1 from a chi-squared critic."""
  return np.asarray(f, dtype=np.float64) / 2.0 + 1.0
