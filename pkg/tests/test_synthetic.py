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

"""Tests for the synthetic module."""

import math

from rdr_eval import estimator
from rdr_eval import network
from rdr_eval import synthetic
from rdr_eval.errors import ConfigError
from rdr_eval.errors import DomainError
from rdr_eval.estimator import Mode
from rdr_eval.numerics import RngState
from rdr_eval.synthetic import Kind
from rdr_eval.synthetic import Scenario

import numpy as np
import pytest
from scipy import integrate
from scipy import stats

CAP = 1.0 - 1.0 / math.sqrt(2.0)

ALL_SCENARIOS = [
    Scenario.gauss_shift(0.0),
    Scenario.gauss_shift(1.0),
    Scenario.gauss_shift(2.0),
    Scenario.gauss_shift(4.0),
    Scenario.gauss_shift(8.0),
    Scenario.beta_mixture("partial_precision"),
    Scenario.beta_mixture("partial_recall"),
    Scenario.beta_mixture("mode_reweight"),
]


def _ids(scenario):
  return scenario.name


@pytest.mark.parametrize(
    ("kind", "delta", "case", "expected"),
    [
        ("gauss-shift", 2.0, None, Scenario.gauss_shift(2.0)),
        ("gauss_shift", 0, None, Scenario.gauss_shift(0.0)),
        ("beta-mixture", None, "partial-recall",
         Scenario.beta_mixture("partial_recall")),
    ],
)
def test_scenario_parse(kind, delta, case, expected):
  """Tests the Scenario.parse function."""
  assert Scenario.parse(kind, delta, case) == expected


@pytest.mark.parametrize(
    ("kind", "delta", "case"),
    [
        ("gauss-shift", None, None),
        ("beta-mixture", None, None),
        ("beta-mixture", None, "bimodal"),
        ("uniform", 1.0, None),
    ],
)
def test_scenario_parse_rejects(kind, delta, case):
  with pytest.raises(ConfigError):
    Scenario.parse(kind, delta, case)


def test_density_closed_forms():
  """Tests the standard normal peak and the Beta support."""
  assert synthetic.density_p(Scenario.gauss_shift(3.0), 0.0) == pytest.approx(
      1.0 / math.sqrt(2.0 * math.pi), rel=1e-12)
  beta = Scenario.beta_mixture("mode_reweight")
  np.testing.assert_array_equal(
      synthetic.density_p(beta, np.array([-0.5, 1.5])), [0.0, 0.0])
  np.testing.assert_array_equal(
      synthetic.density_q(beta, np.array([-0.5, 1.5])), [0.0, 0.0])


@pytest.mark.parametrize("scenario", ALL_SCENARIOS, ids=_ids)
def test_total_mass_is_one(scenario):
  """Tests that both densities integrate to one on the scenario grid."""
  mass_p, mass_q = synthetic.total_mass(scenario)
  assert mass_p == pytest.approx(1.0, abs=1e-8)
  assert mass_q == pytest.approx(1.0, abs=1e-8)


@pytest.mark.parametrize("delta", [0.5, 2.0, 8.0])
def test_analytic_rdr_symmetry_point(delta):
  scenario = Scenario.gauss_shift(delta)
  assert synthetic.analytic_rdr(scenario, delta / 2.0) == pytest.approx(1.0)


def test_analytic_rdr_values():
  """Tests the closed-form Gaussian relative ratio."""
  x = np.linspace(-5.0, 5.0, 11)
  np.testing.assert_allclose(
      synthetic.analytic_rdr(Scenario.gauss_shift(0.0), x), 1.0)
  assert synthetic.analytic_rdr(Scenario.gauss_shift(2.0), 0.0) == (
      pytest.approx(2.0 / (1.0 + math.exp(-2.0)), rel=1e-12))
  assert synthetic.analytic_rdr(Scenario.gauss_shift(2.0), 0.0) == (
      pytest.approx(1.76159, abs=1e-5))
  scenario = Scenario.gauss_shift(1.5)
  np.testing.assert_allclose(
      synthetic.analytic_rdr(scenario, x),
      2.0 * synthetic.density_p(scenario, x) /
      (synthetic.density_p(scenario, x) + synthetic.density_q(scenario, x)),
      rtol=1e-10)


@pytest.mark.parametrize("scenario", ALL_SCENARIOS, ids=_ids)
def test_analytic_ratio_ranges(scenario):
  """Tests r in [0, 2] and g >= 0 on the interior of the support."""
  if scenario.kind is Kind.BETA_MIXTURE:
    x = np.linspace(0.01, 0.99, 400)
  else:
    x = np.linspace(*scenario.plot_range(), 400)
  r = synthetic.analytic_rdr(scenario, x)
  assert np.all((r >= 0.0) & (r <= 2.0))
  g = synthetic.analytic_dr(scenario, x)
  assert np.all(g >= 0.0)
  np.testing.assert_allclose(r, 2.0 * g / (g + 1.0), rtol=1e-9, atol=1e-12)


def test_analytic_ratio_zero_denominator():
  """Tests that points outside a Beta support are named."""
  beta = Scenario.beta_mixture("partial_precision")
  with pytest.raises(DomainError, match="1.5"):
    synthetic.analytic_rdr(beta, np.array([0.5, 1.5]))
  with pytest.raises(DomainError, match="x ="):
    synthetic.analytic_dr(beta, 1.5)


def test_quadrature_h2_examples():
  """Tests the quadrature oracle on equal and on far-apart Gaussians."""
  assert synthetic.quadrature_h2(Scenario.gauss_shift(0.0)) == pytest.approx(
      0.0, abs=1e-10)
  far = Scenario.gauss_shift(8.0)
  assert synthetic.quadrature_h2(far, "q") >= 0.999
  assert synthetic.quadrature_h2(far, "q") == pytest.approx(
      1.0 - math.exp(-8.0), abs=1e-8)
  mixture = synthetic.quadrature_h2(far)
  assert mixture <= CAP + 1e-9
  assert mixture == pytest.approx(0.29289, abs=2e-4)


def test_quadrature_h2_matches_adaptive_quadrature():
  """Tests the trapezoid value at a shift of 8 against scipy.quad."""
  p = stats.norm(0.0, 1.0).pdf
  q = stats.norm(8.0, 1.0).pdf
  overlap, _ = integrate.quad(lambda x: math.sqrt(p(x) * 0.5 * (p(x) + q(x))),
                              -30.0, 40.0, points=[0.0, 4.0, 8.0], limit=200)
  assert synthetic.quadrature_h2(Scenario.gauss_shift(8.0)) == pytest.approx(
      1.0 - overlap, abs=1e-6)


@pytest.mark.parametrize("scenario", ALL_SCENARIOS, ids=_ids)
def test_quadrature_h2_respects_cap(scenario):
  assert synthetic.quadrature_h2(scenario) <= CAP + 1e-9


@pytest.mark.parametrize("scenario", ALL_SCENARIOS, ids=_ids)
def test_population_loss_duality(scenario):
  """Tests that the true ratio attains one minus the Hellinger distance."""
  for alpha, denominator in ((0.0, "q"), (0.5, "mixture")):
    loss = synthetic.population_balancing_loss(scenario, alpha=alpha)
    assert loss == pytest.approx(
        1.0 - synthetic.quadrature_h2(scenario, denominator), abs=1e-6)


def test_population_loss_with_analytic_dr():
  """Tests the duality with the closed-form ratio plugged in."""
  scenario = Scenario.gauss_shift(1.5)
  loss = synthetic.population_balancing_loss(
      scenario, lambda x: synthetic.analytic_dr(scenario, x))
  assert loss == pytest.approx(1.0 - synthetic.quadrature_h2(scenario, "q"),
                               abs=1e-6)
  worse = synthetic.population_balancing_loss(scenario, lambda x: np.ones_like(x))
  assert worse > loss


def test_monte_carlo_mean_of_rdr():
  """Tests the sample mean of r(X) against its integral."""
  scenario = Scenario.gauss_shift(2.0)
  xp, _ = synthetic.sample(scenario, 100_000, 1, RngState(4))
  r = synthetic.analytic_rdr(scenario, xp.values[:, 0])
  grid = scenario.grid()
  nodes = grid.nodes()
  expected = grid.integrate(
      synthetic.analytic_rdr(scenario, nodes) *
      synthetic.density_p(scenario, nodes))
  assert abs(r.mean() - expected) <= 3.0 * r.std() / math.sqrt(r.size)


def test_sample_equal_gaussians_pass_ks():
  """Tests two draws of the same Gaussian with a two-sample KS test."""
  xp, xq = synthetic.sample(Scenario.gauss_shift(0.0), 10_000, 10_000,
                            RngState(12))
  assert stats.ks_2samp(xp.values[:, 0], xq.values[:, 0]).pvalue > 0.01
  assert xp.names == ("x",)
  assert (xp.n_rows, xq.n_rows) == (10_000, 10_000)


def test_sample_shifted_gaussian_moments():
  _, xq = synthetic.sample(Scenario.gauss_shift(3.0), 10, 50_000, RngState(1))
  assert xq.values.mean() == pytest.approx(3.0, abs=0.03)


@pytest.mark.parametrize(
    "case", ["partial_precision", "partial_recall", "mode_reweight"])
def test_sample_beta_mixtures(case):
  """Tests support, determinism and the mixture mean."""
  scenario = Scenario.beta_mixture(case)
  xp, xq = synthetic.sample(scenario, 50_000, 50_000, RngState(6))
  for matrix in (xp, xq):
    assert np.all((matrix.values >= 0.0) & (matrix.values <= 1.0))
  again, _ = synthetic.sample(scenario, 50_000, 50_000, RngState(6))
  np.testing.assert_array_equal(xp.values, again.values)
  grid = scenario.grid()
  nodes = grid.nodes()
  mean_q = grid.integrate(nodes * synthetic.density_q(scenario, nodes))
  assert xq.values.mean() == pytest.approx(mean_q, abs=0.01)


def test_sample_beta_non_integer_shapes():
  """Tests the rejection sampler on Beta(2.5, 1.5)."""
  draws = synthetic._sample_beta(RngState(9), 2.5, 1.5, 100_000)
  assert np.all((draws >= 0.0) & (draws <= 1.0))
  assert draws.mean() == pytest.approx(0.625, abs=0.005)
  assert draws.var() == pytest.approx(0.046875, abs=0.003)


def test_sample_rejects_empty():
  with pytest.raises(ConfigError):
    synthetic.sample(Scenario.gauss_shift(1.0), 0, 5, RngState(0))


def test_oracle_table():
  """Tests the oracle_table columns and grid."""
  table = synthetic.oracle_table(Scenario.gauss_shift(2.0), points=50)
  assert list(table.columns) == ["x", "p", "q", "g", "r"]
  assert len(table) == 50
  assert table["x"].iloc[0] == -6.0
  assert table["x"].iloc[-1] == 8.0
  np.testing.assert_allclose(table["r"], 2.0 * table["g"] / (table["g"] + 1.0),
                             rtol=1e-9)


def test_oracle_table_far_shift():
  """Tests that a large shift keeps every ratio finite and exact."""
  table = synthetic.oracle_table(Scenario.gauss_shift(40.0), points=101)
  x = table["x"].to_numpy()
  assert x[0] == -6.0
  with np.errstate(over="ignore"):
    g, r = np.exp(-40.0 * x + 800.0), 2.0 / (1.0 + np.exp(40.0 * x - 800.0))
  np.testing.assert_allclose(table["g"], g, rtol=1e-12)
  np.testing.assert_allclose(table["r"], r, rtol=1e-12, atol=1e-300)
  assert np.all(np.isfinite(table["r"]))
  assert table["r"].iloc[0] == 2.0
  assert table["r"].iloc[-1] == 0.0
  assert synthetic.analytic_rdr(Scenario.gauss_shift(40.0), 20.0) == 1.0


def test_oracle_table_partial_precision_missing_mode():
  """Tests that r is exactly 2 where q has no mass but p does."""
  table = synthetic.oracle_table(Scenario.beta_mixture("partial_precision"))
  exact = table[table["r"] == 2.0]
  assert len(exact) > 0
  assert exact["x"].min() > 0.8
  assert (exact["p"] > 0.0).all()
  assert table["r"].max() == 2.0
  assert (table.loc[table["x"] < 0.6, "r"] < 1.0).all()


def test_pushforward_constant_model_is_zero():
  """Tests that a constant model pushes both samples to one bin."""
  spec = network.NetworkSpec(1, (3,))
  model = estimator.TrainedRatio(network.zero_params(spec), spec, Mode.RDR,
                                 0.5, 0)
  h2 = synthetic.pushforward_h2(Scenario.gauss_shift(2.0), model,
                                n_mc=2000)
  assert h2 == pytest.approx(0.0, abs=1e-12)


def test_pushforward_exact_ratio_close_to_quadrature(mocker):
  """Tests the pushforward of the true ratio against the quadrature oracle."""
  scenario = Scenario.gauss_shift(2.0)
  model = mocker.Mock(mode=Mode.RDR)
  model.scores.side_effect = lambda x: synthetic.analytic_rdr(scenario,
                                                              x[:, 0])
  h2 = synthetic.pushforward_h2(scenario, model)
  assert h2 == pytest.approx(synthetic.quadrature_h2(scenario), abs=0.05)
  assert model.scores.call_count == 2
