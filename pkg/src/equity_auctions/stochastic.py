"""Revenue-optimal equity-constrained mechanism for independent regular priors.

Allocation follows the vertex structure of the per-profile virtual-surplus
LP: the good goes wholly to a top minority bidder with non-negative virtual
value, is split gamma/(1+gamma) : 1/(1+gamma) between the top minority and
the top majority bidder when the latter dominates and the weighted virtual
surplus is non-negative, and is withheld otherwise.

Payments are exact: along each bidder's own-value axis the allocation is a
step function, so the envelope payment is the sum of (jump size) x (jump
location), and jump locations are inverse virtual values.
"""
from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .dists import GroupStructure, ProductDistribution, RegularMarginal, inverse_virtual_value
from .mech import Mechanism, as_profiles, equity_weights


def _scaled(gamma, x):
    # gamma * x with 0 * (-inf) taken as 0
    return np.zeros_like(x) if gamma == 0 else gamma * x


def _group_max(a: np.ndarray, cols) -> np.ndarray:
    """Row-wise max over the columns ``cols``; -inf for an empty selection."""
    sub = a[:, cols]
    if sub.shape[1] == 0:
        return np.full(a.shape[0], -np.inf)
    return sub.max(axis=1)


class StochasticMechanism(Mechanism):
    """The optimal mechanism for a product of regular marginals."""

    name = "stochastic"

    def __init__(self, groups: GroupStructure, gamma: float, marginals):
        super().__init__(groups, gamma)
        marginals = tuple(marginals)
        if len(marginals) != groups.n:
            raise ValueError("need one marginal per bidder")
        for d in marginals:
            if not isinstance(d, RegularMarginal):
                raise TypeError("marginals must be RegularMarginal instances")
        self.marginals = marginals

    @property
    def prior(self) -> ProductDistribution:
        return ProductDistribution(self.marginals)

    def virtual_values(self, V: np.ndarray) -> np.ndarray:
        V = np.atleast_2d(V)
        return np.column_stack([d.virtual_value(V[:, i]) for i, d in enumerate(self.marginals)])

    # -- allocation ---------------------------------------------------------

    def _components(self, V):
        """Set-aside parts (q_all, q_min) as 0/1 arrays."""
        g = self.groups
        psi = self.virtual_values(V)
        rows = np.arange(V.shape[0])
        top_all = np.argmax(psi, axis=1)
        top_min = np.argmax(psi[:, g.minority], axis=1)
        best_all = psi[rows, top_all]
        best_min = psi[rows, top_min]
        q_all = np.zeros_like(V)
        q_min = np.zeros_like(V)
        q_all[rows, top_all] = (best_all + _scaled(self.gamma, best_min) >= 0).astype(float)
        q_min[rows, top_min] = (best_all + _scaled(self.gamma, best_min) >= 0).astype(float)
        return q_all, q_min

    def _allocate(self, V):
        g = self.groups
        w_all, w_min = equity_weights(self.gamma)
        psi = self.virtual_values(V)
        rows = np.arange(V.shape[0])
        top_all = np.argmax(psi, axis=1)
        top_min = np.argmax(psi[:, g.minority], axis=1)
        best_min = psi[rows, top_min]
        best_maj = _group_max(psi, g.majority)
        q = np.zeros_like(V)
        minority_wins = top_all < g.n_min
        full = minority_wins & (best_min >= 0)
        q[rows[full], top_all[full]] = 1.0
        split = ~minority_wins & (best_maj + _scaled(self.gamma, best_min) >= 0)
        q[rows[split], top_all[split]] = w_all
        q[rows[split], top_min[split]] = w_min
        return q

    def set_aside(self, v):
        """Return ``(q_all, q_min)`` with q = q_all/(1+gamma) + gamma q_min/(1+gamma)."""
        V, single = as_profiles(v, self.groups)
        q_all, q_min = self._components(V)
        return (q_all[0], q_min[0]) if single else (q_all, q_min)

    # -- payments -----------------------------------------------------------

    def _inv(self, i, level, strict=False):
        return inverse_virtual_value(self.marginals[i], level, strict=strict)

    def _pay(self, V):
        g = self.groups
        gamma = self.gamma
        w_all, w_min = equity_weights(gamma)
        psi = self.virtual_values(V)
        q = self._allocate(V)
        m = np.zeros_like(V)
        M_min = _group_max(psi, g.minority)
        B = _group_max(psi, g.majority)
        for i in range(g.n):
            live = q[:, i] > 0
            if not live.any():
                continue
            P = psi[live]
            if g.is_minority(i):
                # entry into "top of the minority group"
                lo_idx = list(range(0, i))
                hi_idx = list(range(i + 1, g.n_min))
                A_lo = _group_max(P, lo_idx)
                A_hi = _group_max(P, hi_idx)
                Bl = B[live]
                x_top = np.maximum(self._inv(i, A_lo, strict=True), self._inv(i, A_hi))
                x_B = self._inv(i, Bl)
                x_full = np.maximum.reduce([x_top, x_B, np.full_like(x_top, self._inv(i, 0.0))])
                if gamma > 0:
                    x_split = np.maximum(x_top, self._inv(i, -Bl / gamma))
                    has_split = x_split < x_B
                else:
                    # no split region without an equity weight; value unused
                    x_split = x_full
                    has_split = np.zeros(x_top.shape, dtype=bool)
                qi = q[live, i]
                full = qi == 1.0
                pay = np.where(full,
                               np.where(has_split, w_min * x_split + w_all * x_full, x_full),
                               w_min * x_split)
                m[live, i] = pay
            else:
                lo_idx = list(range(g.n_min, i))
                hi_idx = list(range(i + 1, g.n))
                C_lo = _group_max(P, lo_idx)
                C_hi = _group_max(P, hi_idx)
                Mm = M_min[live]
                x_t = np.maximum.reduce([
                    self._inv(i, Mm, strict=True),
                    self._inv(i, C_lo, strict=True),
                    self._inv(i, C_hi),
                    self._inv(i, -_scaled(gamma, Mm)),
                ])
                m[live, i] = w_all * x_t
        return m

    # -- expected revenue -----------------------------------------------------

    def expected_revenue(self, estimator: str = "monte-carlo", resolution: int = 1_000_000,
                         seed: int = 0) -> RevenueEstimate:
        return expected_revenue_star(self, estimator, resolution, seed)


class RevenueEstimate(NamedTuple):
    revenue: float
    virtual_surplus: float
    diff_se: float
    revenue_se: float


def expected_revenue_star(S: StochasticMechanism, estimator: str = "monte-carlo",
                          resolution: int = 1_000_000, seed: int = 0,
                          n_se: float = 4.0) -> RevenueEstimate:
    """Expected payments of ``S`` under its own prior, alongside the expected
    virtual surplus; the two must agree (revenue equivalence).

    ``monte-carlo`` draws ``resolution`` profiles; ``closed-grid`` uses the
    midpoint rule with ``resolution`` cells per axis.  Raises
    ``ArithmeticError`` if the two estimates differ by more than ``n_se``
    standard errors (Monte Carlo) or 1e-3 (grid).
    """
    I = S.groups.n
    if estimator == "monte-carlo":
        V = S.prior.sample(resolution, seed)
        w = np.full(V.shape[0], 1.0 / V.shape[0])
    elif estimator == "closed-grid":
        h = 1.0 / resolution
        mids = (np.arange(resolution) + 0.5) * h
        V = np.stack([a.ravel() for a in np.meshgrid(*([mids] * I), indexing="ij")], axis=1)
        dens = np.prod([d.pdf(V[:, i]) for i, d in enumerate(S.marginals)], axis=0)
        w = dens * h ** I
        w = w / w.sum()
    else:
        raise ValueError(f"unknown estimator {estimator!r}")
    pay = S._pay(V).sum(axis=1)
    q = S._allocate(V)
    # q = 0 wherever psi = -inf, so mask before multiplying
    vs = np.where(q > 0, S.virtual_values(V), 0.0) * q
    vs = vs.sum(axis=1)
    rev = float(w @ pay)
    surplus = float(w @ vs)
    if estimator == "monte-carlo":
        n = V.shape[0]
        diff_se = float(np.std(pay - vs, ddof=1) / np.sqrt(n))
        rev_se = float(np.std(pay, ddof=1) / np.sqrt(n))
        if abs(rev - surplus) > n_se * diff_se + 1e-12:
            raise ArithmeticError(f"revenue {rev} and virtual surplus {surplus} disagree")
    else:
        diff_se = rev_se = 0.0
        if abs(rev - surplus) > 1e-3:
            raise ArithmeticError(f"revenue {rev} and virtual surplus {surplus} disagree")
    return RevenueEstimate(rev, surplus, diff_se, rev_se)


def allocate_star(S: StochasticMechanism, v):
    return S.allocate(v)


def pay_star(S: StochasticMechanism, v):
    return S.pay(v)


def set_aside_decompose_star(S: StochasticMechanism, v):
    return S.set_aside(v)
