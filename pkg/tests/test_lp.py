import itertools

import numpy as np
import pytest
from scipy.optimize import linprog

from conftest import ONE_ONE
from equity_auctions import (Beta22, GroupStructure, ProductDistribution, StochasticMechanism, Uniform,
                             assemble_lp, audit_feasibility, discretize, optimal_grid_mechanism, solve_lp,
                             tailored_mechanism)
from equity_auctions.dists import DiscreteDistribution, unit_grid
from equity_auctions.evaluation import posted_price_revenue
from equity_auctions.lp import (LPSizeError, TabulatedMechanism, expectation_mechanism, grid_expected_revenue,
                                ic_row_count)

UU = [Uniform(), Uniform()]
BB = [Beta22(), Beta22()]


def test_counts_on_half_grid():
    P = discretize(ProductDistribution(UU), 0.5)
    L = assemble_lp(P, ONE_ONE, 0.25)
    assert (L.n_profiles, L.n_vars) == (9, 36)
    assert L.row_counts == {"IC": 36, "IR": 18, "AF": 9, "Eq": 9}
    assert assemble_lp(P, ONE_ONE, 0.25, "expectation").row_counts["Eq"] == 1
    assert assemble_lp(P, ONE_ONE, 0.25, ic="adjacent").row_counts["IC"] == 2 * 2 * 2 * 3
    assert ic_row_count(3, 2, "full") == 36


def test_size_guard():
    P = discretize(ProductDistribution(UU), 0.05)
    with pytest.raises(LPSizeError):
        assemble_lp(P, ONE_ONE, 0.25, max_rows=1000)


def test_point_mass_at_top_earns_the_benchmark():
    grid = unit_grid(0.25)
    mass = np.zeros((5, 5))
    mass[-1, -1] = 1.0
    _, rev, res = optimal_grid_mechanism(DiscreteDistribution(grid, mass), ONE_ONE, 0.25)
    assert rev == pytest.approx(1.0, abs=1e-9) and res.kkt.worst <= 1e-7


@pytest.mark.parametrize("delta", [0.5, 0.25, 0.1])
@pytest.mark.parametrize("backend", ["simplex", "highs"])
@pytest.mark.parametrize("marg", [Uniform(), Beta22()])
def test_single_bidder_is_posted_price(delta, backend, marg):
    prior = discretize(ProductDistribution([marg]), delta)
    _, rev, res = optimal_grid_mechanism(prior, GroupStructure(1, 0), 0.0, backend=backend)
    assert rev == pytest.approx(posted_price_revenue(prior)[0], abs=1e-7)
    assert res.kkt.worst <= 1e-7


@pytest.mark.parametrize("gamma", [0.0, 0.25, 1.0, 4.0])
@pytest.mark.parametrize("delta", [0.5, 0.25])
@pytest.mark.parametrize("equity", ["ex-post", "expectation"])
def test_adjacent_ic_equals_full_ic(gamma, delta, equity):
    prior = discretize(ProductDistribution([Beta22(), Uniform()]), delta)
    _, full, _ = optimal_grid_mechanism(prior, ONE_ONE, gamma, equity, ic="full")
    _, adj, _ = optimal_grid_mechanism(prior, ONE_ONE, gamma, equity, ic="adjacent")
    assert adj == pytest.approx(full, abs=1e-6)


@pytest.mark.parametrize("delta", [0.25, 0.1])
def test_relaxation_order_and_injection(delta):
    prior = discretize(ProductDistribution(BB), delta)
    _, post, _ = optimal_grid_mechanism(prior, ONE_ONE, 0.25, "ex-post")
    _, expect, _ = optimal_grid_mechanism(prior, ONE_ONE, 0.25, "expectation")
    assert post <= expect + 1e-9
    star = grid_expected_revenue(StochasticMechanism(ONE_ONE, 0.25, BB), prior)
    assert post >= star - 1e-9


def _corner_lp(gamma, masses):
    """Mechanism LP on the two-point grid {0, 1}^2, written out by hand:
    variables (q1, q2, m1, m2) per profile in the order 00, 01, 10, 11."""
    prof = list(itertools.product([0, 1], repeat=2))
    n = 16
    qi = lambda p, i: 4 * p + i
    mi = lambda p, i: 4 * p + 2 + i
    rows, rhs = [], []
    for p, v in enumerate(prof):
        r = np.zeros(n); r[qi(p, 0)] = r[qi(p, 1)] = 1; rows.append(r); rhs.append(1)        # AF
        r = np.zeros(n); r[qi(p, 1)] = gamma; r[qi(p, 0)] = -1; rows.append(r); rhs.append(0)  # Eq
        for i in range(2):
            r = np.zeros(n); r[mi(p, i)] = 1; r[qi(p, i)] = -v[i]; rows.append(r); rhs.append(0)  # IR
            w = list(v); w[i] = 1 - v[i]
            d = prof.index(tuple(w))
            # u(v; v) >= u(v; w): v_i q(w) - m(w) - v_i q(v) + m(v) <= 0
            r = np.zeros(n)
            r[qi(d, i)] += v[i]; r[mi(d, i)] -= 1; r[qi(p, i)] -= v[i]; r[mi(p, i)] += 1
            rows.append(r); rhs.append(0)
    c = np.zeros(n)
    for p, v in enumerate(prof):
        c[mi(p, 0)] = c[mi(p, 1)] = -masses[v]
    bounds = [(0, 1) if (j % 4) < 2 else (None, None) for j in range(n)]
    return -linprog(c, np.array(rows), rhs, bounds=bounds, method="highs").fun


@pytest.mark.parametrize("gamma", [0.25, 1.0, 3.0])
@pytest.mark.parametrize("rho", [0.0, 0.5, -1.0])
def test_pure_corner_law_matches_two_point_lp(gamma, rho):
    from equity_auctions.dists import corner_masses
    oracle = _corner_lp(gamma, corner_masses(rho))
    for delta in (0.5, 0.1):
        _, rev, _ = tailored_mechanism(1.0, rho, delta, gamma, BB)
        assert rev == pytest.approx(oracle, abs=1e-7)
    if rho == 0.0 and gamma == 0.25:
        assert oracle == pytest.approx(0.65, abs=1e-9)


def test_tailored_at_zero_contamination_is_plain_lp():
    _, a, _ = tailored_mechanism(0.0, 0.5, 0.1, 0.25, BB)
    _, b, _ = optimal_grid_mechanism(discretize(ProductDistribution(BB), 0.1), ONE_ONE, 0.25)
    assert a == pytest.approx(b, abs=1e-12)


def test_audits_of_tabulated_mechanisms():
    T, _, _ = tailored_mechanism(0.3, 0.0, 0.1, 0.25, BB)
    assert audit_feasibility(T).ok
    Q, _, _ = expectation_mechanism(0.1, 0.25, BB)
    report = audit_feasibility(Q)
    assert report.of("Eq") and set(report.counts()) == {"Eq"}


def test_csv_round_trip_and_snapping(tmp_path):
    T, rev, _ = tailored_mechanism(0.2, 0.0, 0.25, 0.25, UU)
    path = tmp_path / "m.csv"
    T.write_csv(path, ["command: test"])
    head = path.read_text().splitlines()[:2]
    assert head == ["# command: test", "v_1,v_2,q_1,q_2,m_1,m_2"]
    R = TabulatedMechanism.read_csv(path, ONE_ONE, 0.25)
    np.testing.assert_allclose(R.q_table, T.q_table, atol=1e-11)
    np.testing.assert_allclose(R.m_table, T.m_table, atol=1e-11)
    # 0.125 is halfway between 0 and 0.25 and snaps down
    assert np.array_equal(T.snap(np.array([[0.125, 0.13]])), [[0, 1]])
    np.testing.assert_array_equal(T.allocate([0.26, 0.99]), T.q_table[1, 4])


def test_dump_triples(tmp_path):
    L = assemble_lp(discretize(ProductDistribution(UU), 0.5), ONE_ONE, 0.25)
    path = tmp_path / "t.csv"
    L.write_triples(path)
    text = path.read_text()
    sections = [s for s in text.splitlines() if s.startswith("# ")]
    assert sections[1:] == ["# objective", "# A_ub", "# b_ub", "# bounds"]
    a_lines = text.split("# A_ub\n")[1].split("# b_ub")[0].strip().splitlines()
    assert len(a_lines) == L.A_ub.nnz


@pytest.mark.parametrize("gamma", [0.25, 2.0])
def test_backends_agree(gamma):
    prior = discretize(ProductDistribution([Beta22(), Uniform()]), 0.2)
    L = assemble_lp(prior, ONE_ONE, gamma)
    revs = [solve_lp(L, b)[1] for b in ("simplex", "highs", "highs-ipm")]
    assert max(revs) - min(revs) <= 1e-7
