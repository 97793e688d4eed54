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

"""Tests for the divergence module."""

import math

from rdr_eval import divergence
from rdr_eval.divergence import MixtureWeight
from rdr_eval.divergence import Objective
from rdr_eval.errors import DomainError
from rdr_eval.errors import ShapeError

import numpy as np
import pytest
from scipy import stats
from scipy.integrate import trapezoid


def _numeric_grad(fn, values, h=1e-6):
  grad = np.zeros_like(values)
  for i in range(values.size):
    up, down = values.copy(), values.copy()
    up[i] += h
    down[i] -= h
    grad[i] = (fn(up) - fn(down)) / (2.0 * h)
  return grad


def test_balancing_loss_at_equal_densities():
  """Tests the p = q fixed point g = 1."""
  report = divergence.balancing_loss(np.ones(10), np.ones(7))
  assert report.loss == pytest.approx(1.0, abs=1e-15)
  assert report.h2_raw == pytest.approx(0.0, abs=1e-15)
  assert (report.n_p, report.n_q) == (10, 7)
  assert report.cap == pytest.approx(1.0 - 1.0 / math.sqrt(2.0))


def test_balancing_loss_forced_arithmetic():
  """Tests 1/2 * 4^(-1/2) + 1/2 * 4^(1/2) at alpha = 0."""
  report = divergence.balancing_loss([4.0], [4.0], MixtureWeight(0.0))
  assert report.loss == pytest.approx(1.25, abs=1e-15)
  assert report.h2_raw == pytest.approx(-0.25)
  assert report.h2_clipped == 0.0
  assert report.cap == 1.0


def test_balancing_loss_population_value():
  """Tests the quadrature loss at the true relative ratio for a shift of 8."""
  x = np.linspace(-12.0, 20.0, 100_000)
  p, q = stats.norm.pdf(x), stats.norm.pdf(x, loc=8.0)
  mix = 0.5 * (p + q)
  r = p / mix
  dx = np.full(x.size, x[1] - x[0])
  dx[[0, -1]] *= 0.5
  report = divergence.balancing_loss(r, r, weights_p=p * dx, weights_q=q * dx)
  assert report.h2_raw == pytest.approx(0.29289, abs=1e-3)
  assert report.h2_raw <= report.cap + 1e-9
  direct = 1.0 - trapezoid(np.sqrt(p * mix), x)
  assert report.h2_raw == pytest.approx(direct, abs=1e-6)


@pytest.mark.parametrize("bad", [0.0, -1.0, np.inf, np.nan])
def test_balancing_loss_rejects_bad_ratio(bad):
  """Tests that the offending index is named."""
  with pytest.raises(DomainError, match=r"g\[1\]\[2\]"):
    divergence.balancing_loss(np.ones(3), np.array([1.0, 1.0, bad]))


def test_balancing_loss_rejects_empty():
  with pytest.raises(ShapeError):
    divergence.balancing_loss([], [1.0])


def test_mixture_weight_bounds():
  """Tests the MixtureWeight domain and its cap."""
  with pytest.raises(DomainError):
    MixtureWeight(1.0)
  with pytest.raises(DomainError):
    MixtureWeight(-0.1)
  assert MixtureWeight(0.25).cap == pytest.approx(0.5)


@pytest.mark.parametrize("alpha", [0.0, 0.3, 0.5])
def test_balancing_loss_grad_matches_finite_differences(alpha):
  """Tests the analytic gradient with central differences."""
  rng = np.random.default_rng(0)
  gp = rng.uniform(0.3, 1.9, 6)
  gq = rng.uniform(0.3, 1.9, 5)
  weight = MixtureWeight(alpha)
  grad_p, grad_q = divergence.balancing_loss_grad(gp, gq, weight)
  num_p = _numeric_grad(
      lambda v: divergence.balancing_loss(v, gq, weight).loss, gp)
  num_q = _numeric_grad(
      lambda v: divergence.balancing_loss(gp, v, weight).loss, gq)
  np.testing.assert_allclose(grad_p, num_p, rtol=1e-4)
  np.testing.assert_allclose(grad_q, num_q, rtol=1e-4)


def test_mixture_balancing_loss_two_components_matches_pairwise():
  """Tests that a two-sample mixture reduces to the pairwise loss."""
  rng = np.random.default_rng(1)
  gp, gq = rng.uniform(0.5, 1.5, 8), rng.uniform(0.5, 1.5, 9)
  loss = divergence.mixture_balancing_loss([gp, gq], [0.5, 0.5], numerator=0)
  assert loss == pytest.approx(divergence.balancing_loss(gp, gq).loss,
                               rel=1e-15)


def test_mixture_balancing_loss_shape_mismatch():
  with pytest.raises(ShapeError):
    divergence.mixture_balancing_loss([np.ones(2)], [0.5, 0.5], numerator=0)


def test_mixture_balancing_loss_grad_three_components():
  """Tests the K-sample gradient with central differences."""
  rng = np.random.default_rng(2)
  comps = [rng.uniform(0.4, 2.5, n) for n in (4, 5, 6)]
  weights = [0.2, 0.3, 0.5]
  grads = divergence.mixture_balancing_loss_grad(comps, weights, numerator=1)
  for k in range(3):

    def loss(v, k=k):
      parts = list(comps)
      parts[k] = v
      return divergence.mixture_balancing_loss(parts, weights, numerator=1)

    np.testing.assert_allclose(grads[k], _numeric_grad(loss, comps[k]),
                               rtol=1e-4)


@pytest.mark.parametrize(("g", "r"), [(1.0, 1.0), (0.0, 0.0), (3.0, 1.5)])
def test_rdr_from_dr(g, r):
  """Tests the rdr_from_dr function and its inverse."""
  assert divergence.rdr_from_dr(g) == pytest.approx(r)
  assert divergence.dr_from_rdr(r) == pytest.approx(g)


def test_rdr_dr_inverse_on_grid():
  g = np.logspace(-6, 6, 1000)
  np.testing.assert_allclose(
      divergence.dr_from_rdr(divergence.rdr_from_dr(g)), g, rtol=1e-9)


@pytest.mark.parametrize("r", [2.0, 2.5, -0.1, np.nan])
def test_dr_from_rdr_domain(r):
  with pytest.raises(DomainError):
    divergence.dr_from_rdr(np.array([1.0, r]))


def test_rdr_from_dr_domain():
  with pytest.raises(DomainError):
    divergence.rdr_from_dr(-1.0)


def test_implied_dr_at_half_matches_dr_from_rdr():
  r = np.linspace(0.01, 1.99, 50)
  g, _ = divergence.implied_dr(r, 0.5)
  np.testing.assert_allclose(g, divergence.dr_from_rdr(r), rtol=1e-12)


@pytest.mark.parametrize("alpha", [0.2, 0.5, 0.7])
def test_implied_dr_slope(alpha):
  """Tests dg/dr against central differences and the pole at 1 / alpha."""
  r = np.linspace(0.05, 0.95 / alpha if alpha > 0.5 else 1.9, 20)
  _, slope = divergence.implied_dr(r, alpha)
  h = 1e-7
  up, _ = divergence.implied_dr(r + h, alpha)
  down, _ = divergence.implied_dr(r - h, alpha)
  np.testing.assert_allclose(slope, (up - down) / (2.0 * h), rtol=1e-5)
  g, slope = divergence.implied_dr(np.array([1.5, 1.9]), 0.7)
  np.testing.assert_array_equal(g, [np.inf, np.inf])
  np.testing.assert_array_equal(slope, [0.0, 0.0])


def test_clamp_and_floor_masks():
  """Tests the pass-through masks of clamp_dr and floor_rdr."""
  clamped, mask = divergence.clamp_dr(np.array([1e-6, 1.0, 1e6]))
  np.testing.assert_array_equal(clamped, [divergence.G_MIN, 1.0,
                                          divergence.G_MAX])
  np.testing.assert_array_equal(mask, [False, True, False])
  floored, mask = divergence.floor_rdr(np.array([0.0, 0.5]))
  np.testing.assert_array_equal(floored, [divergence.R_FLOOR, 0.5])
  np.testing.assert_array_equal(mask, [False, True])


def test_kl_variational_loss_at_equal_densities():
  """Tests f = 1 on both samples."""
  loss = divergence.kl_variational_loss(np.ones(5), np.ones(5))
  assert float(loss) == pytest.approx(0.0, abs=1e-15)
  assert not loss.clamped
  np.testing.assert_allclose(divergence.kl_ratio(np.ones(3)), 1.0)


def test_chisq_variational_loss_at_equal_densities():
  """Tests f = 0 on both samples."""
  loss = divergence.chisq_variational_loss(np.zeros(5), np.zeros(5))
  assert float(loss) == pytest.approx(0.0, abs=1e-15)
  np.testing.assert_allclose(divergence.chisq_ratio(np.zeros(3)), 1.0)


def test_kl_variational_loss_recovers_shifted_gaussian_kl():
  """Tests the optimal critic for N(0, 1) against N(1, 1)."""
  x = np.linspace(-10.0, 11.0, 10_000)
  p, q = stats.norm.pdf(x), stats.norm.pdf(x, loc=1.0)
  f = 1.0 + np.log(p / q)
  dx = np.full(x.size, x[1] - x[0])
  dx[[0, -1]] *= 0.5
  loss = divergence.kl_variational_loss(f, f, weights_p=p * dx,
                                        weights_q=q * dx)
  assert -float(loss) == pytest.approx(0.5, abs=1e-2)


def test_kl_variational_loss_clamps_exponent(caplog):
  """Tests that a huge critic value is clamped and reported."""
  loss = divergence.kl_variational_loss([0.0], [800.0])
  assert loss.clamped
  assert np.isfinite(float(loss))
  assert "clamping" in caplog.text


@pytest.mark.parametrize("objective", [Objective.KL, Objective.CHI_SQ])
def test_variational_loss_grad(objective):
  """Tests the variational gradients with central differences."""
  rng = np.random.default_rng(6)
  fp, fq = rng.normal(size=4), rng.normal(size=6)
  fn = {
      Objective.KL: divergence.kl_variational_loss,
      Objective.CHI_SQ: divergence.chisq_variational_loss,
  }[objective]
  grad_p, grad_q = divergence.variational_loss_grad(objective, fp, fq)
  np.testing.assert_allclose(
      grad_p, _numeric_grad(lambda v: float(fn(v, fq)), fp), rtol=1e-4)
  np.testing.assert_allclose(
      grad_q, _numeric_grad(lambda v: float(fn(fp, v)), fq), rtol=1e-4)


def test_variational_loss_grad_rejects_hellinger():
  with pytest.raises(DomainError):
    divergence.variational_loss_grad(Objective.HELLINGER_SQ, [1.0], [1.0])
