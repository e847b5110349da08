"""Linear programs in the form

    min c @ x   s.t.  A_ub @ x <= b_ub,  A_eq @ x == b_eq,  lb <= x <= ub

solved either by a small dense two-phase revised simplex (Dantzig pricing,
Bland's rule once degenerate pivots start to repeat) or, for instances too
large for dense algebra, by the HiGHS dual simplex shipped with scipy.

Whatever the backend, duals follow scipy's sign conventions (``y_ub <= 0``)
and every solution is checked against the KKT conditions of the original
problem.
"""
from __future__ import annotations

from typing import NamedTuple

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

FEAS_TOL = 1e-9
PIVOT_TOL = 1e-9  # absolute; also scaled by the largest entry of the entering column
REFACTOR_EVERY = 64
DEGENERATE_STREAK = 50
DENSE_LIMIT = 400  # standard-form rows above which "auto" hands over to HiGHS

OPTIMAL, ITERATION_LIMIT, INFEASIBLE, UNBOUNDED = 0, 1, 2, 3
_MESSAGES = {OPTIMAL: "optimal", ITERATION_LIMIT: "iteration limit reached",
             INFEASIBLE: "problem is infeasible", UNBOUNDED: "problem is unbounded"}


class KKTResiduals(NamedTuple):
    primal: float
    dual: float
    complementarity: float

    @property
    def worst(self) -> float:
        return max(self)


class LPResult(NamedTuple):
    x: np.ndarray | None
    fun: float
    status: int
    message: str
    y_ub: np.ndarray | None
    y_eq: np.ndarray | None
    nit: int
    backend: str
    kkt: KKTResiduals | None

    @property
    def success(self) -> bool:
        return self.status == OPTIMAL


def _as_csr(A, n):
    if A is None:
        return sp.csr_matrix((0, n))
    return sp.csr_matrix(A, dtype=float)


def _as_vec(b, m):
    return np.zeros(m) if b is None else np.asarray(b, dtype=float).reshape(m)


def _bounds(bounds, n):
    if bounds is None:
        return np.zeros(n), np.full(n, np.inf)
    lb = np.array([(-np.inf if b[0] is None else b[0]) for b in bounds], dtype=float)
    ub = np.array([(np.inf if b[1] is None else b[1]) for b in bounds], dtype=float)
    return lb, ub


def kkt_residuals(c, A_ub, b_ub, A_eq, b_eq, lb, ub, x, y_ub, y_eq) -> KKTResiduals:
    """Largest violation of primal feasibility, dual feasibility and
    complementary slackness (absolute, in the original problem's units)."""
    c = np.asarray(c, dtype=float)
    n = c.size
    A_ub, A_eq = _as_csr(A_ub, n), _as_csr(A_eq, n)
    b_ub, b_eq = _as_vec(b_ub, A_ub.shape[0]), _as_vec(b_eq, A_eq.shape[0])
    slack = b_ub - A_ub @ x
    primal = max(np.max(-slack, initial=0.0),
                 np.max(np.abs(A_eq @ x - b_eq), initial=0.0),
                 np.max(lb - x, initial=0.0), np.max(x - ub, initial=0.0))
    z = c - A_ub.T @ y_ub - A_eq.T @ y_eq
    # z = z_lo - z_hi with z_lo >= 0 only if lb is finite, z_hi >= 0 only if ub is
    z_lo = np.where(np.isfinite(lb), np.maximum(z, 0.0), 0.0)
    z_hi = np.where(np.isfinite(ub), np.maximum(-z, 0.0), 0.0)
    dual = max(np.max(y_ub, initial=0.0), np.max(np.abs(z - z_lo + z_hi), initial=0.0))
    comp = max(np.max(np.abs(y_ub * slack), initial=0.0),
               np.max(z_lo * np.where(np.isfinite(lb), x - lb, 0.0), initial=0.0),
               np.max(z_hi * np.where(np.isfinite(ub), ub - x, 0.0), initial=0.0))
    return KKTResiduals(float(primal), float(dual), float(comp))


# --------------------------------------------------------------------------
# standard form
# --------------------------------------------------------------------------

class _StandardForm(NamedTuple):
    A: np.ndarray          # dense, rows scaled so that b >= 0
    b: np.ndarray
    c: np.ndarray
    row_sign: np.ndarray   # +1 or -1 per standard row
    n_ub: int
    n_eq: int
    # x = shift + sum over standard columns of col_sign * x'[col]
    col_var: np.ndarray
    col_sign: np.ndarray
    shift: np.ndarray


def _standard_form(c, A_ub, b_ub, A_eq, b_eq, lb, ub) -> _StandardForm:
    n = c.size
    col_var, col_sign = [], []
    shift = np.zeros(n)
    caps = []  # (standard column, capacity) for doubly bounded variables
    for j in range(n):
        if np.isfinite(lb[j]):
            shift[j] = lb[j]
            col_var.append(j)
            col_sign.append(1.0)
            if np.isfinite(ub[j]):
                caps.append((len(col_var) - 1, ub[j] - lb[j]))
        elif np.isfinite(ub[j]):
            shift[j] = ub[j]
            col_var.append(j)
            col_sign.append(-1.0)
        else:
            col_var += [j, j]
            col_sign += [1.0, -1.0]
    col_var = np.array(col_var, dtype=int)
    col_sign = np.array(col_sign)
    n_struct = col_var.size
    m_ub, m_eq, m_cap = A_ub.shape[0], A_eq.shape[0], len(caps)
    n_slack = m_ub + m_cap
    m = m_ub + m_cap + m_eq

    A = np.zeros((m, n_struct + n_slack))
    Dub = A_ub.toarray()
    Deq = A_eq.toarray()
    A[:m_ub, :n_struct] = Dub[:, col_var] * col_sign
    for r, (col, _) in enumerate(caps):
        A[m_ub + r, col] = 1.0
    A[m_ub + m_cap:, :n_struct] = Deq[:, col_var] * col_sign
    A[np.arange(n_slack), n_struct + np.arange(n_slack)] = 1.0
    b = np.concatenate([b_ub - Dub @ shift, [cap for _, cap in caps], b_eq - Deq @ shift])
    cs = np.concatenate([c[col_var] * col_sign, np.zeros(n_slack)])

    row_sign = np.where(b < 0, -1.0, 1.0)
    A *= row_sign[:, None]
    b *= row_sign
    return _StandardForm(A, b, cs, row_sign, m_ub, m_eq, col_var, col_sign, shift)


# --------------------------------------------------------------------------
# dense revised simplex on min c x, A x = b >= 0, x >= 0
# --------------------------------------------------------------------------

class _Tableau:
    """Basis bookkeeping with an explicit inverse, updated by eta
    transformations and refactored periodically."""

    def __init__(self, A, b, basis):
        self.A = A
        self.b = b
        self.basis = np.array(basis, dtype=int)
        self.refactor()

    def refactor(self):
        self.Binv = np.linalg.inv(self.A[:, self.basis])
        self.xB = self.Binv @ self.b
        self.updates = 0

    def pivot(self, r, j, u):
        piv = u[r]
        self.Binv[r] /= piv
        others = np.arange(u.size) != r
        self.Binv[others] -= np.outer(u[others], self.Binv[r])
        theta = self.xB[r] / piv
        self.xB[others] -= theta * u[others]
        self.xB[r] = theta
        self.basis[r] = j
        self.updates += 1
        if self.updates >= REFACTOR_EVERY:
            self.refactor()


def _simplex_loop(T: _Tableau, cost, allowed, max_iter):
    """Run simplex pivots on ``T`` for ``cost``; columns with ``allowed``
    False never enter.  Returns (status, iterations)."""
    streak = 0
    for it in range(max_iter):
        y = cost[T.basis] @ T.Binv
        d = cost - y @ T.A
        d[T.basis] = 0.0
        d[~allowed] = 0.0
        candidates = np.nonzero(d < -FEAS_TOL)[0]
        if candidates.size == 0:
            return OPTIMAL, it
        bland = streak >= DEGENERATE_STREAK
        j = candidates[0] if bland else candidates[np.argmin(d[candidates])]
        u = T.Binv @ T.A[:, j]
        pos = u > max(PIVOT_TOL, PIVOT_TOL * np.abs(u).max())
        if not pos.any():
            return UNBOUNDED, it
        # Harris two-pass ratio test: bound the step with slightly relaxed
        # rows, then take the largest pivot among rows blocking within it
        xB = np.maximum(T.xB, 0.0)
        cap = ((xB[pos] + FEAS_TOL) / u[pos]).min()
        ratios = np.full(u.size, np.inf)
        ratios[pos] = xB[pos] / u[pos]
        ties = np.nonzero(ratios <= cap)[0]
        best = ratios[ties].min()
        if bland:
            r = ties[np.argmin(T.basis[ties])]
        else:
            r = ties[np.argmax(u[ties])]
        streak = streak + 1 if best <= FEAS_TOL else 0
        T.pivot(r, j, u)
    return ITERATION_LIMIT, max_iter


def _revised_simplex(S: _StandardForm, max_iter):
    m, n = S.A.shape
    if m == 0:
        x = np.where(S.c < 0, np.inf, 0.0)
        status = UNBOUNDED if np.isinf(x).any() else OPTIMAL
        return status, x, np.zeros(0), 0
    # phase one: an artificial column per row
    A1 = np.hstack([S.A, np.eye(m)])
    c1 = np.concatenate([np.zeros(n), np.ones(m)])
    T = _Tableau(A1, S.b, np.arange(n, n + m))
    allowed = np.ones(n + m, dtype=bool)
    status, it1 = _simplex_loop(T, c1, allowed, max_iter)
    T.refactor()
    if status != OPTIMAL or c1[T.basis] @ T.xB > FEAS_TOL * max(1.0, np.abs(S.b).max()):
        return INFEASIBLE, None, None, it1
    # drive zero-level artificials out of the basis; drop rows that stay
    keep = np.ones(m, dtype=bool)
    for r in range(m):
        if T.basis[r] < n:
            continue
        row = T.Binv[r] @ S.A
        row[T.basis[T.basis < n]] = 0.0
        js = np.nonzero(np.abs(row) > 1e-8)[0]
        if js.size:
            j = js[np.argmax(np.abs(row[js]))]
            T.pivot(r, j, T.Binv @ A1[:, j])
        else:
            keep[r] = False
    T.refactor()
    allowed[n:] = False
    c2 = np.concatenate([S.c, np.zeros(m)])
    status, it2 = _simplex_loop(T, c2, allowed, max_iter - it1)
    T.refactor()
    x = np.zeros(n + m)
    x[T.basis] = np.maximum(T.xB, 0.0)
    # duals of the standard rows; redundant rows get zero
    y = c2[T.basis] @ T.Binv
    y[~keep] = 0.0
    return status, x[:n], y, it1 + it2


def _solve_dense(c, A_ub, b_ub, A_eq, b_eq, lb, ub, max_iter):
    S = _standard_form(c, A_ub, b_ub, A_eq, b_eq, lb, ub)
    status, xs, ys, nit = _revised_simplex(S, max_iter)
    if status != OPTIMAL:
        return status, None, None, None, nit
    x = S.shift.copy()
    np.add.at(x, S.col_var, S.col_sign * xs[:S.col_var.size])
    y = ys * S.row_sign
    m_ub, m_eq = S.n_ub, S.n_eq
    return status, x, y[:m_ub], y[y.size - m_eq:] if m_eq else np.zeros(0), nit


def _solve_highs(c, A_ub, b_ub, A_eq, b_eq, lb, ub, max_iter, method="highs-ds"):
    res = linprog(c, A_ub=A_ub if A_ub.shape[0] else None, b_ub=b_ub if A_ub.shape[0] else None,
                  A_eq=A_eq if A_eq.shape[0] else None, b_eq=b_eq if A_eq.shape[0] else None,
                  bounds=np.column_stack([np.where(np.isfinite(lb), lb, -np.inf),
                                          np.where(np.isfinite(ub), ub, np.inf)]),
                  method=method,
                  options={"primal_feasibility_tolerance": 1e-10,
                           "dual_feasibility_tolerance": 1e-10,
                           "maxiter": max_iter})
    status = {0: OPTIMAL, 1: ITERATION_LIMIT, 2: INFEASIBLE, 3: UNBOUNDED}.get(res.status, res.status)
    if status != OPTIMAL:
        return status, None, None, None, int(getattr(res, "nit", 0))
    y_ub = res.ineqlin.marginals if A_ub.shape[0] else np.zeros(0)
    y_eq = res.eqlin.marginals if A_eq.shape[0] else np.zeros(0)
    return status, res.x, np.asarray(y_ub), np.asarray(y_eq), int(res.nit)


def solve(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, bounds=None, *,
          backend: str = "auto", max_iter: int = 200_000) -> LPResult:
    """Solve the LP and attach its KKT residuals.

    ``bounds`` is a sequence of ``(lo, hi)`` pairs (``None`` for unbounded),
    defaulting to ``x >= 0``.  ``backend`` is ``"simplex"`` (the dense
    revised simplex in this module), ``"highs"`` (dual simplex),
    ``"highs-ipm"`` (interior point followed by crossover to a vertex) or
    ``"auto"`` (the first for small instances, the second otherwise).
    """
    c = np.asarray(c, dtype=float)
    n = c.size
    A_ub, A_eq = _as_csr(A_ub, n), _as_csr(A_eq, n)
    b_ub, b_eq = _as_vec(b_ub, A_ub.shape[0]), _as_vec(b_eq, A_eq.shape[0])
    lb, ub = _bounds(bounds, n)
    if backend == "auto":
        rows = A_ub.shape[0] + A_eq.shape[0] + int(np.sum(np.isfinite(lb) & np.isfinite(ub)))
        backend = "simplex" if rows <= DENSE_LIMIT else "highs"
    if backend == "simplex":
        status, x, y_ub, y_eq, nit = _solve_dense(c, A_ub, b_ub, A_eq, b_eq, lb, ub, max_iter)
    elif backend in ("highs", "highs-ipm"):
        method = "highs-ds" if backend == "highs" else "highs-ipm"
        status, x, y_ub, y_eq, nit = _solve_highs(c, A_ub, b_ub, A_eq, b_eq, lb, ub, max_iter, method)
    else:
        raise ValueError(f"unknown backend {backend!r}")
    if status != OPTIMAL:
        return LPResult(None, np.nan, status, _MESSAGES.get(status, "solver failure"),
                        None, None, nit, backend, None)
    kkt = kkt_residuals(c, A_ub, b_ub, A_eq, b_eq, lb, ub, x, y_ub, y_eq)
    return LPResult(x, float(c @ x), status, _MESSAGES[status], y_ub, y_eq, nit, backend, kkt)
