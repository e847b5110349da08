"""Mechanisms, the equity-constrained hindsight benchmark, ex-post regret and
feasibility audits.

A mechanism maps value profiles to allocation probabilities ``q`` and
payments ``m``.  Every rule here is vectorized: pass a single profile of
shape ``(I,)`` or a batch of shape ``(n, I)``.
"""
from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .dists import GroupStructure, unit_grid

INV_E = math.exp(-1.0)


def equity_weights(gamma: float) -> tuple[float, float]:
    """(1/(1+gamma), gamma/(1+gamma)); the second is formed as 1 minus the
    first so that the two add up to exactly 1.0 in floating point."""
    if gamma < 0:
        raise ValueError("equity level gamma must be non-negative")
    w_all = 1.0 / (1.0 + gamma)
    return w_all, 1.0 - w_all


def as_profiles(v, groups: GroupStructure) -> tuple[np.ndarray, bool]:
    arr = np.asarray(v, dtype=float)
    single = arr.ndim == 1
    arr = np.atleast_2d(arr)
    if arr.ndim != 2 or arr.shape[1] != groups.n:
        raise ValueError(f"expected profiles with {groups.n} coordinates, got shape {np.shape(v)}")
    if np.any(~(arr >= 0.0) | ~(arr <= 1.0)):
        raise ValueError("values must lie in [0, 1]")
    return arr, single


class Outcome(NamedTuple):
    q: np.ndarray
    m: np.ndarray


class Mechanism:
    """Deterministic allocation and payment rules with an equity level."""

    name = "mechanism"
    grid: np.ndarray | None = None  # set by mechanisms tabulated on a grid

    def __init__(self, groups: GroupStructure, gamma: float):
        equity_weights(gamma)
        self.groups = groups
        self.gamma = float(gamma)

    def _allocate(self, V: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _pay(self, V: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def allocate(self, v):
        V, single = as_profiles(v, self.groups)
        q = self._allocate(V)
        return q[0] if single else q

    def pay(self, v):
        V, single = as_profiles(v, self.groups)
        m = self._pay(V)
        return m[0] if single else m

    def outcome(self, v) -> Outcome:
        return Outcome(self.allocate(v), self.pay(v))

    def __repr__(self):
        return f"{type(self).__name__}(groups={self.groups}, gamma={self.gamma})"


class ZeroMechanism(Mechanism):
    """Never allocates, never charges."""

    name = "zero"

    def _allocate(self, V):
        return np.zeros_like(V)

    def _pay(self, V):
        return np.zeros_like(V)


class HindsightMechanism(Mechanism):
    """Full-information rule: the top bidder gets 1/(1+gamma), the top
    minority bidder gets gamma/(1+gamma), each pays its value for it.

    Not incentive compatible; it realizes the hindsight benchmark exactly
    and is useful only as a reference point for regret.
    """

    name = "hindsight"

    def _allocate(self, V):
        w_all, w_min = equity_weights(self.gamma)
        q = np.zeros_like(V)
        rows = np.arange(V.shape[0])
        q[rows, np.argmax(V, axis=1)] += w_all
        q[rows, np.argmax(V[:, self.groups.minority], axis=1)] += w_min
        return q

    def _pay(self, V):
        return self._allocate(V) * V


def hindsight_revenue(v, gamma: float, groups: GroupStructure):
    """(1/(1+gamma)) max_i v_i + (gamma/(1+gamma)) max_{minority} v_i."""
    if groups.n_min < 1:
        raise ValueError("the benchmark needs at least one minority bidder")
    V, single = as_profiles(v, groups)
    w_all, w_min = equity_weights(gamma)
    out = w_all * V.max(axis=1) + w_min * V[:, groups.minority].max(axis=1)
    return float(out[0]) if single else out


def ex_post_regret(M: Mechanism, v):
    """Hindsight revenue at ``v`` minus the payments collected by ``M``."""
    V, single = as_profiles(v, M.groups)
    reg = hindsight_revenue(V, M.gamma, M.groups) - M._pay(V).sum(axis=1)
    return float(reg[0]) if single else reg


# --------------------------------------------------------------------------
# envelope-formula quadrature
# --------------------------------------------------------------------------

SIMPSON_PANELS = 10_000
# audit scan for jumps; a coarse scan can merge two nearby jumps, which then
# shows up as a payment violation, never hides one
JUMP_SCAN = 2_000
JUMP_MARGIN = 1e-10
_BISECT_STEPS = 55


def _simpson_weights(n_panels: int) -> np.ndarray:
    w = np.ones(n_panels + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w / 3.0


def _own_axis_allocation(M, V, i, X):
    """q_i(x, v_-i) for each row of V and each column of X."""
    P, K = X.shape
    W = np.repeat(V, K, axis=0)
    W[:, i] = X.ravel()
    return M._allocate(W)[:, i].reshape(P, K)


def envelope_quadrature(M: Mechanism, V: np.ndarray, i: int, panels: int = SIMPSON_PANELS,
                        scan: int = SIMPSON_PANELS, batch: int = 64):
    """Integral of x -> q_i(x, v_-i) over [0, v_i] by composite Simpson.

    Jumps of the integrand (found on a uniform scan with ``scan`` steps and
    located by bisection) split the domain, and each smooth piece gets its own
    ``panels``-panel Simpson rule.  Returns ``(integral, monotonicity_gap)``,
    the second being the largest decrease of q_i seen along the scan.
    """
    V = np.atleast_2d(np.asarray(V, dtype=float))
    panels += panels % 2
    w = _simpson_weights(panels)
    t = np.linspace(0.0, 1.0, panels + 1)
    t_scan = np.linspace(0.0, 1.0, scan + 1)
    integral = np.zeros(V.shape[0])
    gap = np.zeros(V.shape[0])
    for start in range(0, V.shape[0], batch):
        Vb = V[start:start + batch]
        x = Vb[:, i]
        X = x[:, None] * t_scan[None, :]
        Q = _own_axis_allocation(M, Vb, i, X)
        dQ = np.diff(Q, axis=1)
        gap[start:start + batch] = np.maximum(0.0, -dQ.min(axis=1))
        # a jump shows up as a step rising above both neighbouring steps
        pad = np.full((dQ.shape[0], 1), -np.inf)
        nb = np.maximum(np.hstack([pad, dQ[:, :-1]]), np.hstack([dQ[:, 1:], pad]))
        rows, cols = np.nonzero((dQ > nb + JUMP_MARGIN) & (dQ > JUMP_MARGIN))
        lo = X[rows, cols]
        hi = X[rows, cols + 1]
        q_lo = Q[rows, cols]
        q_hi = Q[rows, cols + 1]
        for _ in range(_BISECT_STEPS):
            if rows.size == 0:
                break
            mid = 0.5 * (lo + hi)
            q_mid = _own_axis_allocation(M, Vb[rows], i, mid[:, None])[:, 0]
            left = (q_mid - q_lo) > (q_hi - q_mid)
            hi = np.where(left, mid, hi)
            lo = np.where(left, lo, mid)
            q_hi = np.where(left, q_mid, q_hi)
            q_lo = np.where(left, q_lo, q_mid)
        # smooth pieces: [0, lo_1], [hi_1, lo_2], ..., [hi_K, v_i]; pairing the
        # k-th sorted start of a row with its k-th sorted end
        own = np.arange(Vb.shape[0])
        s_row = np.concatenate([own, rows])
        s_val = np.concatenate([np.zeros(own.size), hi])
        e_row = np.concatenate([rows, own])
        e_val = np.concatenate([lo, x])
        s_ord = np.lexsort((s_val, s_row))
        e_ord = np.lexsort((e_val, e_row))
        piece_r = s_row[s_ord]
        piece_a = s_val[s_ord]
        piece_b = np.maximum(e_val[e_ord], piece_a)
        length = piece_b - piece_a
        P = piece_a[:, None] + length[:, None] * t[None, :]
        # pin the ends: a + (b - a) can round past b onto the far side of a jump
        P[:, 0] = piece_a
        P[:, -1] = piece_b
        Qp = _own_axis_allocation(M, Vb[piece_r], i, P)
        h = length / panels
        vals = h * (Qp @ w)
        np.add.at(integral, start + piece_r, vals)
    return integral, gap


# --------------------------------------------------------------------------
# audits
# --------------------------------------------------------------------------

class Violation(NamedTuple):
    constraint: str
    profile: tuple
    magnitude: float


@dataclass
class AuditReport:
    mechanism: str
    tolerance: float
    profiles_checked: int
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self):
        return self.ok

    def counts(self) -> dict:
        out: dict = {}
        for v in self.violations:
            out[v.constraint] = out.get(v.constraint, 0) + 1
        return out

    def of(self, constraint: str) -> list:
        return [v for v in self.violations if v.constraint == constraint]

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["constraint", "profile", "violation"])
            for v in self.violations:
                prof = " ".join(f"{x:.12g}" for x in v.profile)
                w.writerow([v.constraint, prof, f"{v.magnitude:.12g}"])


def _collect(report, name, V, excess, tol):
    bad = np.nonzero(excess > tol)[0]
    for k in bad:
        report.violations.append(Violation(name, tuple(np.round(V[k], 12).tolist()), float(excess[k])))


def _check_pointwise(report, M, V, q, m, tol):
    g = M.groups
    _collect(report, "bounds", V, np.maximum(-q, q - 1.0).max(axis=1), tol)
    _collect(report, "AF", V, q.sum(axis=1) - 1.0, tol)
    eq_gap = M.gamma * q[:, g.majority].sum(axis=1) - q[:, g.minority].sum(axis=1)
    _collect(report, "Eq", V, eq_gap, tol)
    _collect(report, "IR", V, (m - q * V).max(axis=1), tol)


def _check_envelope(report, M, V, q, m, tol, panels, scan):
    for i in range(M.groups.n):
        integral, gap = envelope_quadrature(M, V, i, panels, scan)
        _collect(report, "monotone", V, gap, tol)
        resid = np.abs(m[:, i] - (q[:, i] * V[:, i] - integral))
        _collect(report, "payment", V, resid, tol)


def _audit_tabulated(M, tol) -> AuditReport:
    grid = M.grid
    I = M.groups.n
    V = np.stack([a.ravel() for a in np.meshgrid(*([grid] * I), indexing="ij")], axis=1)
    q = M.q_table.reshape(-1, I)
    m = M.m_table.reshape(-1, I)
    report = AuditReport(M.name, tol, V.shape[0])
    _check_pointwise(report, M, V, q, m, tol)
    for i in range(I):
        qi = np.moveaxis(M.q_table[..., i], i, -1)
        mi = np.moveaxis(M.m_table[..., i], i, -1)
        mono = np.maximum(0.0, -np.diff(qi, axis=-1)).max(axis=-1, initial=0.0)
        # utility of type grid[a] reporting grid[b]
        U = grid[:, None] * qi[..., None, :] - mi[..., None, :]
        truthful = np.diagonal(U, axis1=-2, axis2=-1)
        ic_gap = (U.max(axis=-1) - truthful)
        ic_gap = np.moveaxis(ic_gap, -1, i).ravel()
        _collect(report, "IC", V, ic_gap, tol)
        mono_full = np.broadcast_to(mono[..., None], qi.shape)
        _collect(report, "monotone", V, np.moveaxis(mono_full, -1, i).ravel(), tol)
    return report


def audit_feasibility(M: Mechanism, delta: float = 0.02, tol: float = 1e-6, *,
                      n_samples: int = 100_000, quad_profiles: int | None = None,
                      panels: int = SIMPSON_PANELS, scan: int = JUMP_SCAN, seed: int = 0) -> AuditReport:
    """Check IC (monotonicity + envelope payments), IR, AF and equity.

    Mechanisms tabulated on a grid are audited exactly on that grid (pairwise
    IC instead of the envelope formula).  Otherwise, for up to three bidders
    every profile of the ``delta`` grid is checked; for more bidders
    ``n_samples`` uniform profiles plus all corners are.  ``quad_profiles``
    caps how many of those profiles get the (expensive) quadrature check.
    """
    if M.grid is not None:
        return _audit_tabulated(M, tol)
    I = M.groups.n
    if I <= 3:
        g = unit_grid(delta)
        V = np.stack([a.ravel() for a in np.meshgrid(*([g] * I), indexing="ij")], axis=1)
    else:
        rng = np.random.default_rng(seed)
        corners = np.array(list(itertools.product([0.0, 1.0], repeat=I)))
        V = np.vstack([corners, rng.random((n_samples, I))])
    q = M._allocate(V)
    m = M._pay(V)
    report = AuditReport(M.name, tol, V.shape[0])
    _check_pointwise(report, M, V, q, m, tol)
    if I > 3:
        # cheap monotonicity spot check against a random lower own report
        rng = np.random.default_rng(seed + 1)
        for i in range(I):
            W = V.copy()
            W[:, i] *= rng.random(V.shape[0])
            _collect(report, "monotone", V, M._allocate(W)[:, i] - q[:, i], tol)
    n_quad = V.shape[0] if quad_profiles is None else min(quad_profiles, V.shape[0])
    _check_envelope(report, M, V[:n_quad], q[:n_quad], m[:n_quad], tol, panels, scan)
    return report
