import math

import numpy as np
import pytest
from scipy.optimize import brentq

from equity_auctions import beta_star, bounds_summary, factor_curve, theta, u_star
from equity_auctions.bounds import bound_objective, gamma_grid, stationarity_residual

INV_E = math.exp(-1)


def residual(g, u):
    """Stationarity condition written out independently of the library."""
    return g / (1 + g) * math.log((1 + g * u) / (1 + g)) - math.log(u) - 1 / (1 + g)


def test_unconstrained_root_is_inverse_e():
    assert u_star(0.0) == pytest.approx(INV_E, abs=1e-12)
    assert theta(0.0) == pytest.approx(INV_E, abs=1e-12)


@pytest.mark.parametrize("g", [0.1, 0.5, 1.0, 3.0, 10.0, 100.0])
def test_root_matches_brent(g):
    ref = brentq(lambda u: residual(g, u), INV_E, 1.0, xtol=1e-14)
    assert u_star(g) == pytest.approx(ref, abs=1e-11)
    assert residual(g, INV_E) > 0 > residual(g, 1.0)


@pytest.mark.parametrize("g", [0.1, 1.0, 10.0, 100.0])
def test_residual_at_root(g):
    assert abs(residual(g, u_star(g))) <= 1e-10
    assert abs(stationarity_residual(g, u_star(g))) <= 1e-10


@pytest.mark.parametrize("g", [0.05, 0.25, 0.91, 2.0, 50.0])
def test_root_maximizes_bound_objective(g, rng):
    u = rng.uniform(INV_E, 1.0, 256)
    assert np.all(bound_objective(g, u_star(g)) >= bound_objective(g, u) - 1e-15)


def test_theta_formula_written_out():
    g = 0.25
    u = u_star(g)
    z = (1 + g * u) / (1 + g)
    b = max(1 / (1 + g), INV_E)
    assert theta(g) == pytest.approx(z * math.log(z) - u * math.log(u) - b * math.log(b), abs=1e-15)


def test_beta_star():
    assert beta_star(0.0) == 1.0
    assert beta_star(1.0) == 0.5
    assert beta_star(5.0) == pytest.approx(INV_E)


def test_large_gamma_limit():
    assert abs(theta(1e6) - INV_E) < 1e-3
    f = [np.e * theta(g) for g in (1e2, 1e3, 1e4)]
    assert f[0] > f[1] > f[2] > 1.0


def test_summary_invariants():
    for g in np.linspace(0, 30, 301):
        s = bounds_summary(g)
        assert INV_E - 1e-12 <= s.u_star <= 1.0
        assert s.theta >= INV_E - 1e-12 and s.factor >= 1 - 1e-12
        assert s.beta_star == max(1 / (1 + g), INV_E)


def test_curve_peak():
    curve = factor_curve(0.0, 10.0, 1001)
    assert curve.max == pytest.approx(1.31, abs=0.01)
    assert curve.argmax == pytest.approx(0.91, abs=0.05)
    assert curve.max <= 1.32
    assert abs(curve.factor[0] - 1.0) <= 1e-12
    assert curve.theta.min() >= INV_E - 1e-12


def test_curve_csv(tmp_path):
    path = tmp_path / "b.csv"
    factor_curve(0, 1, 5).write_csv(path, ["command: test"])
    lines = path.read_text().splitlines()
    assert lines[0] == "# command: test"
    assert lines[1] == "gamma,u_star,beta_star,theta,factor"
    assert len(lines) == 7


def test_gamma_grid_spacings():
    assert np.allclose(gamma_grid(0, 1, 3, "linear"), [0, 0.5, 1])
    assert np.allclose(gamma_grid(1, 100, 3, "log"), [1, 10, 100])
    mixed = gamma_grid(0, 100, 50, "mixed")
    assert mixed.size == 50 and mixed[0] == 0 and mixed[-1] == pytest.approx(100)
    assert np.all(np.diff(mixed) > 0)
    with pytest.raises(ValueError):
        gamma_grid(0, 10, 5, "log")
    with pytest.raises(ValueError):
        gamma_grid(2, 1, 5)
    with pytest.raises(ValueError):
        u_star(-1.0)
