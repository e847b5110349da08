"""Grid mechanism design LPs and the tabulated mechanisms they produce.

Values are restricted to the grid {0, delta, ..., 1}.  For every grid
profile and bidder there is an allocation variable q and a payment m;
variables are laid out as ``[q (profile-major, bidder-minor), m (same)]``
with profiles in C order.  The LP maximizes expected payments subject to
IC (pairwise or between adjacent grid values), IR, AF and equity, the last
either at every profile (``ex-post``) or once in expectation.

Adjacent IC is not an approximation here: with utilities linear in the own
value, up- and down-deviations to neighbouring grid values imply a monotone
allocation, and monotonicity chains the local constraints into all pairwise
ones.
"""
from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import simplex
from .dists import (ContaminatedDistribution, DiscreteDistribution, GroupStructure,
                    ProductDistribution, discretize, grid_steps)
from .mech import Mechanism

EQUITY_MODES = ("ex-post", "expectation")
IC_MODES = ("full", "adjacent")
MAX_ROWS = 500_000
SOLVER_TOL = 1e-7


class LPSizeError(ValueError):
    pass


class LPSolveError(RuntimeError):
    pass


@dataclass
class GridMechanismLP:
    """Assembled LP: minimize ``c @ x`` s.t. ``A_ub @ x <= b_ub``."""

    prior: DiscreteDistribution
    groups: GroupStructure
    gamma: float
    equity: str
    ic: str
    c: np.ndarray
    A_ub: sp.csr_matrix
    b_ub: np.ndarray
    bounds: list
    row_counts: dict

    @property
    def grid(self) -> np.ndarray:
        return self.prior.grid

    @property
    def n_profiles(self) -> int:
        return self.prior.mass.size

    @property
    def n_vars(self) -> int:
        return self.c.size

    @property
    def n_rows(self) -> int:
        return self.A_ub.shape[0]

    def q_index(self, p, i):
        return np.asarray(p) * self.groups.n + i

    def m_index(self, p, i):
        return self.n_profiles * self.groups.n + np.asarray(p) * self.groups.n + i

    def write_triples(self, path) -> None:
        """Sparse dump: ``# objective`` section with (col, coeff), ``# A_ub``
        section with (row, col, coeff), ``# b_ub`` with (row, value) and
        ``# bounds`` with (col, lo, hi); blank bounds are infinite."""
        A = self.A_ub.tocoo()
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            fh.write(f"# minimize; vars={self.n_vars} rows={self.n_rows}\n# objective\n")
            for j in np.nonzero(self.c)[0]:
                w.writerow([j, f"{self.c[j]:.17g}"])
            fh.write("# A_ub\n")
            order = np.lexsort((A.col, A.row))
            for r, j, a in zip(A.row[order], A.col[order], A.data[order]):
                w.writerow([r, j, f"{a:.17g}"])
            fh.write("# b_ub\n")
            for r, b in enumerate(self.b_ub):
                w.writerow([r, f"{b:.17g}"])
            fh.write("# bounds\n")
            for j, (lo, hi) in enumerate(self.bounds):
                w.writerow([j, "" if lo is None else lo, "" if hi is None else hi])


def _ic_pairs(k1: int, ic: str):
    """(true index, reported index) pairs on a grid with k1 points."""
    a, b = np.meshgrid(np.arange(k1), np.arange(k1), indexing="ij")
    a, b = a.ravel(), b.ravel()
    keep = a != b if ic == "full" else np.abs(a - b) == 1
    return a[keep], b[keep]


def ic_row_count(k1: int, I: int, ic: str) -> int:
    pairs = k1 * (k1 - 1) if ic == "full" else 2 * (k1 - 1)
    return I * pairs * k1 ** (I - 1)


def assemble_lp(prior: DiscreteDistribution, groups: GroupStructure, gamma: float,
                equity: str = "ex-post", ic: str = "full", max_rows: int = MAX_ROWS) -> GridMechanismLP:
    if equity not in EQUITY_MODES:
        raise ValueError(f"equity mode must be one of {EQUITY_MODES}")
    if ic not in IC_MODES:
        raise ValueError(f"IC mode must be one of {IC_MODES}")
    if gamma < 0:
        raise ValueError("gamma must be non-negative")
    I = groups.n
    if prior.n != I:
        raise ValueError("prior dimension does not match the group structure")
    grid = prior.grid
    k1 = grid.size
    P = k1 ** I
    n_rows = ic_row_count(k1, I, ic) + 2 * P + I * P + (P if equity == "ex-post" else 1)
    if n_rows > max_rows:
        raise LPSizeError(f"LP would have {n_rows} rows (cap {max_rows}); "
                          "use adjacent IC, a coarser grid or raise the cap")
    n_vars = 2 * I * P
    qix = np.arange(P * I).reshape((k1,) * I + (I,))
    mix = qix + P * I
    rows, cols, vals, rhs = [], [], [], []
    counts = {}
    r0 = 0

    def add(block_rows, block_cols, block_vals, name, n_new, b=0.0):
        nonlocal r0
        rows.append(np.asarray(block_rows).ravel() + r0)
        cols.append(np.asarray(block_cols).ravel())
        vals.append(np.asarray(block_vals, dtype=float).ravel())
        rhs.append(np.full(n_new, b))
        counts[name] = n_new
        r0 += n_new

    # IC: v_a (q(b) - q(a)) - (m(b) - m(a)) <= 0 for bidder i, true a, report b
    a, b = _ic_pairs(k1, ic)
    n_ic = 0
    ic_r, ic_c, ic_v = [], [], []
    for i in range(I):
        qi = np.moveaxis(qix[..., i], i, -1).reshape(-1, k1)
        mi = np.moveaxis(mix[..., i], i, -1).reshape(-1, k1)
        n_other = qi.shape[0]
        rid = n_ic + np.arange(n_other * a.size).reshape(n_other, a.size)
        v = np.broadcast_to(grid[a], rid.shape)
        for cidx, coef in ((qi[:, b], v), (qi[:, a], -v), (mi[:, b], -1.0), (mi[:, a], 1.0)):
            ic_r.append(rid.ravel())
            ic_c.append(cidx.ravel())
            ic_v.append(np.broadcast_to(coef, rid.shape).ravel())
        n_ic += rid.size
    add(np.concatenate(ic_r), np.concatenate(ic_c), np.concatenate(ic_v), "IC", n_ic)

    # IR: m_i(v) - v_i q_i(v) <= 0
    V = prior.profiles()
    pr = np.arange(P * I)
    add(np.concatenate([pr, pr]), np.concatenate([qix.ravel(), mix.ravel()]),
        np.concatenate([-V.ravel(), np.ones(P * I)]), "IR", P * I)

    # AF: sum_i q_i(v) <= 1
    add(np.repeat(np.arange(P), I), qix.ravel(), np.ones(P * I), "AF", P, 1.0)

    # Eq: gamma * sum_maj q - sum_min q <= 0
    sign = np.where([groups.is_minority(i) for i in range(I)], -1.0, gamma)
    coef = np.tile(sign, P)
    if equity == "ex-post":
        add(np.repeat(np.arange(P), I), qix.ravel(), coef, "Eq", P)
    else:
        add(np.zeros(P * I, dtype=int), qix.ravel(), coef * np.repeat(prior.weights(), I), "Eq", 1)

    r = np.concatenate(rows)
    cidx = np.concatenate(cols)
    v = np.concatenate(vals)
    keep = v != 0.0
    A = sp.csr_matrix((v[keep], (r[keep], cidx[keep])), shape=(r0, n_vars))
    c = np.zeros(n_vars)
    c[P * I:] = -np.repeat(prior.weights(), I)
    bounds = [(0.0, 1.0)] * (P * I) + [(None, None)] * (P * I)
    return GridMechanismLP(prior, groups, float(gamma), equity, ic, c, A, np.concatenate(rhs), bounds, counts)


class TabulatedMechanism(Mechanism):
    """Mechanism given by tables on a grid; off-grid profiles snap to the
    nearest grid profile, ties toward the lower coordinate."""

    def __init__(self, groups, gamma, grid, q_table, m_table, equity="ex-post", name="lp"):
        super().__init__(groups, gamma)
        self.grid = np.asarray(grid, dtype=float)
        shape = (self.grid.size,) * groups.n + (groups.n,)
        self.q_table = np.asarray(q_table, dtype=float).reshape(shape)
        self.m_table = np.asarray(m_table, dtype=float).reshape(shape)
        self.equity = equity
        self.name = name

    @property
    def delta(self) -> float:
        return float(self.grid[1] - self.grid[0])

    def snap(self, V):
        k = self.grid.size - 1
        idx = np.ceil(np.asarray(V) * k - 0.5 - 1e-9).astype(int)
        return np.clip(idx, 0, k)

    def _lookup(self, table, V):
        idx = self.snap(V)
        return table[tuple(idx[:, i] for i in range(idx.shape[1]))]

    def _allocate(self, V):
        return self._lookup(self.q_table, V)

    def _pay(self, V):
        return self._lookup(self.m_table, V)

    def profiles(self):
        g = self.grid
        mesh = np.meshgrid(*([g] * self.groups.n), indexing="ij")
        return np.stack([a.ravel() for a in mesh], axis=1)

    def write_csv(self, path, header_lines=(), digits: int = 12) -> None:
        I = self.groups.n
        with open(path, "w", newline="") as fh:
            for line in header_lines:
                fh.write(f"# {line}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([f"v_{i + 1}" for i in range(I)] + [f"q_{i + 1}" for i in range(I)]
                       + [f"m_{i + 1}" for i in range(I)])
            q = self.q_table.reshape(-1, I)
            m = self.m_table.reshape(-1, I)
            for v, qq, mm in zip(self.profiles(), q, m):
                w.writerow([f"{x:.{digits}g}" for x in np.concatenate([v, qq, mm])])

    @classmethod
    def read_csv(cls, path, groups, gamma, equity="ex-post", name="lp"):
        with open(path) as fh:
            lines = [ln for ln in fh if not ln.startswith("#")]
        body = np.loadtxt(lines[1:], delimiter=",", ndmin=2)
        I = groups.n
        grid = np.unique(body[:, 0])
        k = grid_steps(float(grid[1] - grid[0]))
        return cls(groups, gamma, np.arange(k + 1) / k, body[:, I:2 * I], body[:, 2 * I:], equity, name)


def solve_lp(L: GridMechanismLP, backend: str = "auto", name: str | None = None):
    """Solve ``L`` and return ``(TabulatedMechanism, expected revenue, LPResult)``.

    Raises ``LPSolveError`` unless the solver reports an optimum whose KKT
    residuals are all within 1e-7.
    """
    res = simplex.solve(L.c, A_ub=L.A_ub, b_ub=L.b_ub, bounds=L.bounds, backend=backend)
    if res.status == simplex.UNBOUNDED:
        raise LPSolveError("LP reported unbounded, which IR and AF rule out")
    if not res.success:
        raise LPSolveError(res.message)
    if res.kkt.worst > SOLVER_TOL:
        raise LPSolveError(f"KKT residuals {tuple(res.kkt)} exceed {SOLVER_TOL}")
    P, I = L.n_profiles, L.groups.n
    q = np.clip(res.x[:P * I], 0.0, 1.0)
    m = res.x[P * I:]
    label = name or ("lp-" + L.equity)
    M = TabulatedMechanism(L.groups, L.gamma, L.grid, q, m, L.equity, label)
    return M, -res.fun, res


def optimal_grid_mechanism(prior: DiscreteDistribution, groups: GroupStructure, gamma: float,
                           equity: str = "ex-post", ic: str = "auto", backend: str = "auto",
                           name: str | None = None, max_rows: int = MAX_ROWS):
    """Assemble and solve in one step; ``ic="auto"`` uses full IC on grids
    with at most 11 points per axis and adjacent IC beyond."""
    if ic == "auto":
        ic = "full" if prior.grid.size <= 11 else "adjacent"
    L = assemble_lp(prior, groups, gamma, equity, ic, max_rows)
    return solve_lp(L, backend, name)


def tailored_mechanism(eps: float, rho: float, delta: float, gamma: float, marginals,
                       groups: GroupStructure | None = None, **kw):
    """LP-optimal ex-post-equitable mechanism for the discretized
    contamination mixture (1 - eps) F + eps B^rho."""
    base = ProductDistribution(marginals)
    groups = groups or GroupStructure(1, 1)
    J = ContaminatedDistribution(base, eps, rho) if eps > 0 else base
    return optimal_grid_mechanism(discretize(J, delta), groups, gamma, "ex-post",
                                  name=f"tailored(eps={eps:g},rho={rho:g})", **kw)


def expectation_mechanism(delta: float, gamma: float, marginals, groups: GroupStructure | None = None, **kw):
    """LP-optimal mechanism under the discretized base law with equity only
    in expectation."""
    groups = groups or GroupStructure(1, 1)
    prior = discretize(ProductDistribution(marginals), delta)
    return optimal_grid_mechanism(prior, groups, gamma, "expectation", name="lp-expectation", **kw)


def grid_expected_revenue(M: Mechanism, prior: DiscreteDistribution) -> float:
    """Sum over grid profiles of mass times total payments."""
    V = prior.profiles()
    return float(prior.weights() @ M._pay(V).sum(axis=1))


def table_digest(M: TabulatedMechanism) -> str:
    h = hashlib.sha256()
    h.update(np.round(M.q_table, 12).tobytes())
    h.update(np.round(M.m_table, 12).tobytes())
    return h.hexdigest()[:16]
