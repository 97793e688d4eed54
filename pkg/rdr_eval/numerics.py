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

"""Dense linear algebra, seeded randomness and stable scalar kernels.

The random stream is SplitMix64 with its published constants. Word k of a
stream seeded with s is the SplitMix64 mix of s + k * 0x9E3779B97F4A7C15
(mod 2**64), so any slice of the stream is produced in one vectorized call
and the draws do not depend on the platform.
"""

import dataclasses
from typing import Sequence

from rdr_eval.errors import DomainError
from rdr_eval.errors import ShapeError
from rdr_eval.errors import SingularSystemError

import numpy as np
import scipy.linalg

PIVOT_TOLERANCE = 1e-12

_GOLDEN_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX_1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX_2 = np.uint64(0x94D049BB133111EB)
_SPAWN_MULTIPLIER = 0xD1B54A32D192ED03
_MASK_64 = (1 << 64) - 1
_TWO_POW_MINUS_53 = 1.0 / (1 << 53)


@dataclasses.dataclass(frozen=True)
class SampleMatrix:
  """Dense n x d table of observations.

  Attributes:
      values: 2-D float64 array, one observation per row.
      column_names: Optional names, one per column.
  """

  values: np.ndarray
  column_names: tuple[str, ...] | None = None

  def __post_init__(self):
    values = np.ascontiguousarray(self.values, dtype=np.float64)
    if values.ndim == 1:
      values = values.reshape(-1, 1)
    if values.ndim != 2:
      raise ShapeError(
          f"SampleMatrix needs a 2-D array, got shape {values.shape}"
      )
    if not np.all(np.isfinite(values)):
      bad_row, bad_col = np.argwhere(~np.isfinite(values))[0]
      raise DomainError(f"non-finite entry at row {bad_row}, column {bad_col}")
    object.__setattr__(self, "values", values)
    if self.column_names is not None:
      names = tuple(str(name) for name in self.column_names)
      if len(names) != values.shape[1]:
        raise ShapeError(
            f"{len(names)} column names for {values.shape[1]} columns"
        )
      object.__setattr__(self, "column_names", names)

  @property
  def n_rows(self) -> int:
    return self.values.shape[0]

  @property
  def n_cols(self) -> int:
    return self.values.shape[1]

  @property
  def names(self) -> tuple[str, ...]:
    """Column names, defaulting to x0, x1, ..."""
    if self.column_names is not None:
      return self.column_names
    return tuple(f"x{j}" for j in range(self.n_cols))

  def take(self, rows: Sequence[int] | np.ndarray) -> "SampleMatrix":
    """Returns the sub-matrix made of the given rows, in order."""
    index = np.asarray(rows, dtype=np.intp)
    return SampleMatrix(self.values[index], self.column_names)


def _splitmix(states: np.ndarray) -> np.ndarray:
  z = states.copy()
  with np.errstate(over="ignore"):
    z ^= z >> np.uint64(30)
    z *= _MIX_1
    z ^= z >> np.uint64(27)
    z *= _MIX_2
    z ^= z >> np.uint64(31)
  return z


@dataclasses.dataclass
class RngState:
  """Single-owner SplitMix64 stream.

  Attributes:
      seed: Unsigned 64-bit seed.
      counter: Number of 64-bit words already drawn.
  """

  seed: int
  counter: int = 0

  def __post_init__(self):
    self.seed = int(self.seed) & _MASK_64

  def next_uint64(self, n: int) -> np.ndarray:
    """Draws the next n raw 64-bit words and advances the stream."""
    if n < 0:
      raise DomainError(f"draw count must be nonnegative, got {n}")
    steps = np.arange(self.counter + 1, self.counter + 1 + n, dtype=np.uint64)
    with np.errstate(over="ignore"):
      states = np.uint64(self.seed) + steps * _GOLDEN_GAMMA
    self.counter += n
    return _splitmix(states)

  def spawn(self, key: int) -> "RngState":
    """Derives a child stream for `key` without advancing this one."""
    salt = ((int(key) + 1) * _SPAWN_MULTIPLIER) & _MASK_64
    mixed = _splitmix(np.array([self.seed ^ salt], dtype=np.uint64))
    return RngState(int(mixed[0]))


def rng_uniform(state: RngState, n: int) -> np.ndarray:
  """Draws n U(0, 1) variates on the 2**-53 lattice of [0, 1)."""
  words = state.next_uint64(n)
  return (words >> np.uint64(11)).astype(np.float64) * _TWO_POW_MINUS_53


def rng_normal(state: RngState, n: int) -> np.ndarray:
  """Draws n standard normal variates by the Box-Muller transform.

  Consecutive uniform pairs (u1, u2) give two normals each. An odd n drops
  the second normal of the last pair, so the stream always advances by
  2 * ceil(n / 2) words.
  """
  if n < 0:
    raise DomainError(f"draw count must be nonnegative, got {n}")
  pairs = (n + 1) // 2
  u = rng_uniform(state, 2 * pairs).reshape(pairs, 2)
  radius = np.sqrt(-2.0 * np.log1p(-u[:, 0]))  # 1 - u1 lies in (0, 1]
  angle = 2.0 * np.pi * u[:, 1]
  out = np.empty((pairs, 2), dtype=np.float64)
  out[:, 0] = radius * np.cos(angle)
  out[:, 1] = radius * np.sin(angle)
  return out.reshape(-1)[:n]


def rng_permutation(state: RngState, n: int) -> np.ndarray:
  """Returns a uniformly random permutation of range(n)."""
  return np.argsort(state.next_uint64(n), kind="stable")


def affine(x, w: np.ndarray, b: np.ndarray):
  """Computes x @ w.T + b with a fixed accumulation order.

  Each output entry is accumulated over input columns in index order and the
  bias is added last, so results are bitwise equal to a naive triple loop.

  Args:
      x: SampleMatrix or 2-D array with n rows and d columns.
      w: Weight matrix of shape (u, d).
      b: Bias vector of length u.

  Returns:
      The n x u result, as a SampleMatrix when x is one.

  Raises:
      ShapeError: If the shapes do not chain.
  """
  values = x.values if isinstance(x, SampleMatrix) else np.asarray(x)
  w = np.asarray(w, dtype=np.float64)
  b = np.asarray(b, dtype=np.float64)
  if w.ndim != 2 or values.ndim != 2 or w.shape[1] != values.shape[1]:
    raise ShapeError(
        f"cannot apply weights of shape {w.shape} to input of shape"
        f" {values.shape}"
    )
  if b.shape != (w.shape[0],):
    raise ShapeError(
        f"bias of shape {b.shape} does not match weights of shape {w.shape}"
    )
  out = np.zeros((values.shape[0], w.shape[0]), dtype=np.float64)
  for k in range(values.shape[1]):
    out += np.multiply.outer(values[:, k], w[:, k])
  out += b
  if isinstance(x, SampleMatrix):
    return SampleMatrix(out)
  return out


@dataclasses.dataclass(frozen=True)
class DenseSquareSystem:
  """The linear system a @ z = b."""

  a: np.ndarray
  b: np.ndarray


def solve_square(system: DenseSquareSystem) -> np.ndarray:
  """Solves a square system by partial-pivot Gaussian elimination.

  Args:
      system: The system to solve.

  Returns:
      The solution vector z.

  Raises:
      ShapeError: If a is not square or b does not match it.
      DomainError: If an entry is not finite.
      SingularSystemError: If a pivot magnitude falls below 1e-12.
  """
  a = np.asarray(system.a, dtype=np.float64)
  b = np.asarray(system.b, dtype=np.float64)
  if a.ndim != 2 or a.shape[0] != a.shape[1]:
    raise ShapeError(f"system matrix must be square, got shape {a.shape}")
  if b.shape != (a.shape[0],):
    raise ShapeError(
        f"right-hand side of shape {b.shape} for matrix of shape {a.shape}"
    )
  if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
    raise DomainError("system has non-finite entries")
  if a.shape[0] == 0:
    return np.zeros(0)
  lu, piv = scipy.linalg.lu_factor(a, check_finite=False)
  pivots = np.abs(np.diag(lu))
  step = int(np.argmin(pivots))
  if pivots[step] < PIVOT_TOLERANCE:
    raise SingularSystemError(
        f"singular system: pivot {pivots[step]:.3e} at elimination step"
        f" {step} is below {PIVOT_TOLERANCE}",
        columns=[str(step)],
    )
  return scipy.linalg.lu_solve((lu, piv), b, check_finite=False)


def stable_softplus(z):
  """Returns log(1 + exp(z)) as max(z, 0) + log1p(exp(-|z|))."""
  z = np.asarray(z, dtype=np.float64)
  out = np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z)))
  return float(out) if out.ndim == 0 else out


def logistic(z):
  """Returns 1 / (1 + exp(-z)) without overflow."""
  z = np.asarray(z, dtype=np.float64)
  e = np.exp(-np.abs(z))
  out = np.where(z >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
  return float(out) if out.ndim == 0 else out
