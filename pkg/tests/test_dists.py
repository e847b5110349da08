import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import beta22_psi
from equity_auctions import (Beta22, ContaminatedDistribution, GroupStructure, ProductDistribution,
                             TabulatedMarginal, Uniform, discretize, inverse_virtual_value, sample_joint,
                             virtual_value)
from equity_auctions.dists import (RegularityError, corner_masses, distribution_from_config, grid_steps,
                                   marginal_from_config, unit_grid)


# -- virtual values -----------------------------------------------------------

def test_uniform_virtual_value_examples():
    assert virtual_value(Uniform(), 1.0) == 1.0
    assert virtual_value(Uniform(), 0.5) == pytest.approx(0.0, abs=1e-15)


def test_beta22_virtual_value_matches_closed_form():
    v = np.linspace(0.01, 0.99, 99)
    np.testing.assert_allclose(virtual_value(Beta22(), v), beta22_psi(v), rtol=0, atol=1e-12)
    assert virtual_value(Beta22(), 0.5) == pytest.approx(1 / 6, abs=1e-12)
    assert virtual_value(Beta22(), 1.0) == 1.0


def test_virtual_value_rejects_out_of_range():
    for bad in (-0.1, 1.1, np.nan):
        with pytest.raises(ValueError):
            virtual_value(Uniform(), bad)


def test_virtual_values_non_decreasing(marginal):
    v = np.linspace(0, 1, 10_001)
    psi = marginal.virtual_value(v)
    assert np.all(np.diff(psi[np.isfinite(psi)]) >= -1e-12)


# -- inverse ------------------------------------------------------------------

def test_inverse_examples():
    assert inverse_virtual_value(Uniform(), 0.0) == pytest.approx(0.5, abs=1e-10)
    assert inverse_virtual_value(Beta22(), 1 / 6) == pytest.approx(0.5, abs=1e-9)
    assert inverse_virtual_value(Uniform(), -5.0) == 0.0
    assert inverse_virtual_value(Beta22(), -np.inf) == 0.0


@settings(max_examples=200, deadline=None)
@given(st.floats(0.001, 1.0), st.sampled_from(["uniform", "beta22"]))
def test_inverse_after_forward_is_identity(v, family):
    d = marginal_from_config({"family": family})
    assert inverse_virtual_value(d, d.virtual_value(v)) == pytest.approx(v, abs=1e-8)


def test_inverse_vectorized_agrees_with_scalar():
    y = np.linspace(-2, 1, 13)
    vec = inverse_virtual_value(Beta22(), y)
    assert np.allclose(vec, [inverse_virtual_value(Beta22(), t) for t in y])


# -- tabulated marginals ------------------------------------------------------

def test_tabulated_constant_density_is_uniform():
    d = TabulatedMarginal([0.0, 0.5, 1.0], [1.0, 1.0, 1.0])
    v = np.linspace(0.05, 0.95, 19)
    np.testing.assert_allclose(d.virtual_value(v), 2 * v - 1, atol=1e-9)
    np.testing.assert_allclose(d.cdf(v), v, atol=1e-12)


def test_tabulated_rejects_irregular():
    # mass piled near 0 and 1 gives a non-monotone virtual value
    with pytest.raises(RegularityError):
        TabulatedMarginal([0.0, 0.3, 0.7, 1.0], [5.0, 0.05, 0.05, 5.0])


def test_marginal_from_config_unknown_family():
    with pytest.raises(ValueError):
        marginal_from_config({"family": "lognormal"})


# -- groups -------------------------------------------------------------------

def test_group_structure_partition():
    g = GroupStructure(2, 3)
    assert g.n == 5
    idx = np.arange(5)
    assert list(idx[g.minority]) == [0, 1] and list(idx[g.majority]) == [2, 3, 4]
    with pytest.raises(ValueError):
        GroupStructure(0, 2)


# -- sampling -----------------------------------------------------------------

def test_mixture_without_contamination_is_base():
    base = ProductDistribution([Beta22(), Beta22()])
    a = sample_joint(ContaminatedDistribution(base, 0.0, 0.3), 1000, 5)
    assert np.all((a > 0) & (a < 1))


def test_perfectly_correlated_corners():
    base = ProductDistribution([Uniform(), Uniform()])
    s = sample_joint(ContaminatedDistribution(base, 1.0, 1.0), 20_000, 1)
    assert np.all(s[:, 0] == s[:, 1]) and set(np.unique(s)) == {0.0, 1.0}
    assert abs(np.mean(s[:, 0]) - 0.5) < 4 * np.sqrt(0.25 / 20_000)


@pytest.mark.parametrize("rho", [-0.5, 0.0, 0.5])
def test_corner_frequencies_within_binomial_band(rho):
    n = 100_000
    base = ProductDistribution([Beta22(), Beta22()])
    s = sample_joint(ContaminatedDistribution(base, 1.0, rho), n, 11)
    for (a, b), p in corner_masses(rho).items():
        freq = np.mean((s[:, 0] == a) & (s[:, 1] == b))
        assert abs(freq - p) <= 3 * np.sqrt(p * (1 - p) / n)


def test_sampling_is_reproducible():
    J = ContaminatedDistribution(ProductDistribution([Beta22(), Uniform()]), 0.3, -0.5)
    assert np.array_equal(J.sample(500, 9), J.sample(500, 9))
    assert not np.array_equal(J.sample(500, 9), J.sample(500, 10))


# -- discretization -----------------------------------------------------------

def test_uniform_half_grid_masses():
    # point g collects (g - 1/2, g]; the point 0 carries no mass
    P = discretize(ProductDistribution([Uniform(), Uniform()]), 0.5)
    expected = np.outer([0, 0.5, 0.5], [0, 0.5, 0.5])
    np.testing.assert_allclose(P.mass, expected, atol=1e-15)


def test_beta22_masses_match_cdf_differences():
    P = discretize(ProductDistribution([Beta22()]), 0.1)
    g = np.linspace(0, 1, 11)
    F = 3 * g ** 2 - 2 * g ** 3
    np.testing.assert_allclose(P.mass[1:], np.diff(F), atol=1e-14)
    assert P.mass[0] == 0.0


def test_fine_grid_total_mass():
    P = discretize(ProductDistribution([Beta22(), Beta22()]), 0.01)
    assert abs(P.mass.sum() - 1) <= 1e-9 and P.mass.min() >= 0


@pytest.mark.parametrize("rho", [-1.0, 0.0, 0.5])
def test_pure_corner_law_lands_on_corners(rho):
    P = discretize(ContaminatedDistribution(ProductDistribution([Uniform(), Beta22()]), 1.0, rho), 0.05)
    k = P.grid.size - 1
    for (a, b), p in corner_masses(rho).items():
        assert P.mass[a * k, b * k] == pytest.approx(p, abs=1e-15)
    assert P.mass.sum() == pytest.approx(1.0, abs=1e-12)


def test_grid_step_validation():
    assert grid_steps(0.02) == 50
    assert np.allclose(unit_grid(0.25), [0, 0.25, 0.5, 0.75, 1])
    for bad in (0.3, 0.0, 1.0, 0.6):
        with pytest.raises(ValueError):
            grid_steps(bad)


def test_distribution_from_config():
    J = distribution_from_config({"marginals": [{"family": "beta22"}] * 2,
                                  "contamination": {"eps": 0.1, "rho": 0.0}})
    assert isinstance(J, ContaminatedDistribution) and J.eps == 0.1
