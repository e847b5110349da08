"""Revenue, regret and equity diagnostics for mechanisms.

Expectations are exact sums over a discrete table (``exhaustive-grid``) or
sample means with standard errors (``monte-carlo``).  Percentiles use the
nearest-rank rule on the (weighted) regret distribution.
"""
from __future__ import annotations

import csv
import itertools
from dataclasses import asdict, dataclass
from typing import Callable, Mapping

import numpy as np

from .dists import (ContaminatedDistribution, DiscreteDistribution, GroupStructure, JointValueDistribution,
                    ProductDistribution, discretize, unit_grid)
from .lp import LPSolveError, tailored_mechanism
from .mech import Mechanism, equity_weights, hindsight_revenue

EQUITY_SLACK = 1e-9
PERCENTILES = (25, 50, 75)
DEFAULT_SAMPLES = 100_000


def weighted_percentile(x, w, pct) -> float:
    """Nearest-rank percentile: the smallest x whose cumulative weight
    reaches pct% of the total."""
    x = np.asarray(x, dtype=float)
    w = np.asarray(w, dtype=float)
    order = np.argsort(x, kind="stable")
    cum = np.cumsum(w[order])
    k = np.searchsorted(cum, pct / 100.0 * cum[-1] * (1 - 1e-12), side="left")
    return float(x[order][min(k, x.size - 1)])


def equity_violation(q, groups: GroupStructure, gamma: float) -> np.ndarray:
    """Per-profile indicator of sum_min q < gamma sum_maj q (beyond 1e-9)."""
    return q[:, groups.minority].sum(axis=1) < gamma * q[:, groups.majority].sum(axis=1) - EQUITY_SLACK


@dataclass
class EvaluationReport:
    mechanism: str
    distribution: str
    mode: str
    revenue: float
    revenue_se: float
    regret_p25: float
    regret_p50: float
    regret_p75: float
    regret_max: float
    equity_violation: float
    size: int
    seed: int | None

    def __post_init__(self):
        p = (self.regret_p25, self.regret_p50, self.regret_p75, self.regret_max)
        if any(b < a for a, b in zip(p, p[1:])):
            raise ValueError("regret percentiles must be non-decreasing")
        if not 0.0 <= self.equity_violation <= 1.0:
            raise ValueError("violation probability must lie in [0, 1]")

    def summary(self) -> str:
        se = f" (se {self.revenue_se:.2g})" if self.mode == "monte-carlo" else ""
        return (f"{self.mechanism} under {self.distribution} [{self.mode}, n={self.size}]\n"
                f"  expected revenue   {self.revenue:.6f}{se}\n"
                f"  regret p25/p50/p75 {self.regret_p25:.6f} / {self.regret_p50:.6f} / {self.regret_p75:.6f}\n"
                f"  regret max         {self.regret_max:.6f}\n"
                f"  P[equity violated] {self.equity_violation:.6f}")

    @staticmethod
    def write_csv(reports, path, header_lines=(), digits: int = 12) -> None:
        fields = list(EvaluationReport.__dataclass_fields__)
        with open(path, "w", newline="") as fh:
            for line in header_lines:
                fh.write(f"# {line}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(fields)
            for r in reports:
                row = asdict(r)
                w.writerow([f"{row[k]:.{digits}g}" if isinstance(row[k], float) else row[k] for k in fields])


def _describe(J) -> str:
    """Short label such as ``beta22 x beta22 eps=0.1 rho=0 delta=0.02``."""
    d = J.describe()
    parts = [" x ".join(m["family"] for m in d.get("marginals", []))]
    if "contamination" in d:
        parts.append("eps={eps:g} rho={rho:g}".format(**d["contamination"]))
    if "discrete_grid_step" in d:
        parts.append(f"delta={d['discrete_grid_step']:g}")
    return " ".join(p for p in parts if p)


def evaluate(M: Mechanism, J: JointValueDistribution, gamma: float | None = None,
             mode: str = "exhaustive-grid", n: int = DEFAULT_SAMPLES, seed: int = 0) -> EvaluationReport:
    """Expected revenue, regret percentiles and the probability of an ex-post
    equity violation of ``M`` under ``J``."""
    gamma = M.gamma if gamma is None else float(gamma)
    if mode == "exhaustive-grid":
        if not isinstance(J, DiscreteDistribution):
            raise TypeError("exhaustive evaluation needs a discrete table; discretize first")
        V = J.profiles()
        w = J.weights()
        used_seed = None
    elif mode == "monte-carlo":
        V = J.sample(n, seed)
        w = np.full(V.shape[0], 1.0 / V.shape[0])
        used_seed = seed
    else:
        raise ValueError(f"unknown mode {mode!r}")
    q = M._allocate(V)
    pay = M._pay(V).sum(axis=1)
    regret = hindsight_revenue(V, gamma, M.groups) - pay
    revenue = float(w @ pay)
    se = float(np.std(pay, ddof=1) / np.sqrt(pay.size)) if mode == "monte-carlo" else 0.0
    live = w > 0
    pct = [weighted_percentile(regret[live], w[live], p) for p in PERCENTILES]
    viol = float(np.clip(w @ equity_violation(q, M.groups, gamma), 0.0, 1.0))
    return EvaluationReport(M.name, _describe(J), mode, revenue, se, *pct, float(regret[live].max()),
                            viol, int(V.shape[0]), used_seed)


# --------------------------------------------------------------------------
# contamination sweep
# --------------------------------------------------------------------------

@dataclass
class SweepRow:
    eps: float
    rho: float
    tailored_revenue: float
    normalized: dict
    regret_p75: dict
    error: str = ""


def normalized_revenue_sweep(mechs: Mapping[str, Mechanism], marginals, gamma: float, eps_list,
                             rho: float, delta: float, groups: GroupStructure | None = None,
                             solver: Callable | None = None) -> list[SweepRow]:
    """For each eps, re-solve the tailored LP under the discretized mixture
    and report every mechanism's revenue divided by the tailored optimum,
    plus 75th-percentile regrets.  An LP failure is recorded on its row."""
    groups = groups or GroupStructure(1, 1)
    solver = solver or tailored_mechanism
    base = ProductDistribution(marginals)
    rows = []
    for eps in eps_list:
        if not 0.0 <= eps <= 1.0:
            raise ValueError("contamination levels must lie in [0, 1]")
        J = ContaminatedDistribution(base, eps, rho) if eps > 0 else base
        prior = discretize(J, delta)
        try:
            T, opt, _ = solver(eps, rho, delta, gamma, marginals, groups)
        except LPSolveError as exc:
            nan = {name: np.nan for name in mechs}
            rows.append(SweepRow(eps, rho, np.nan, dict(nan, tailored=np.nan), dict(nan, tailored=np.nan), str(exc)))
            continue
        norm, p75 = {"tailored": 1.0}, {}
        tail = evaluate(T, prior, gamma)
        p75["tailored"] = tail.regret_p75
        for name, M in mechs.items():
            rep = evaluate(M, prior, gamma)
            norm[name] = rep.revenue / opt
            p75[name] = rep.regret_p75
        rows.append(SweepRow(eps, rho, opt, norm, p75))
    return rows


def write_sweep_csv(rows, path, which: str = "normalized", header_lines=(), digits: int = 12) -> None:
    names = list(rows[0].normalized if which == "normalized" else rows[0].regret_p75)
    with open(path, "w", newline="") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["eps", "rho"] + names + ["error"])
        for r in rows:
            vals = getattr(r, "normalized" if which == "normalized" else "regret_p75")
            w.writerow([f"{r.eps:.{digits}g}", f"{r.rho:.{digits}g}"]
                       + [f"{vals[k]:.{digits}g}" for k in names] + [r.error])


# --------------------------------------------------------------------------
# worst-case regret
# --------------------------------------------------------------------------

def _profiles(axes):
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([a.ravel() for a in mesh], axis=1)


def worst_case_regret(M: Mechanism, delta: float = 0.005, gamma: float | None = None,
                      n_incumbents: int = 8, chunk: int = 200_000):
    """Largest ex-post regret on the ``delta`` grid, refined with step
    ``delta/10`` around the best few grid profiles.  Returns
    ``(value, profile)``."""
    I = M.groups.n
    if I > 3:
        raise ValueError("exhaustive regret search supports at most three bidders")
    gamma = M.gamma if gamma is None else float(gamma)
    g = unit_grid(delta)
    V = _profiles([g] * I)
    reg = np.concatenate([hindsight_revenue(V[s:s + chunk], gamma, M.groups)
                          - M._pay(V[s:s + chunk]).sum(axis=1) for s in range(0, V.shape[0], chunk)])
    best_k = np.argsort(reg)[::-1][:n_incumbents]
    best_val, best_v = float(reg[best_k[0]]), V[best_k[0]]
    fine = np.linspace(-delta, delta, 21)
    for k in best_k:
        axes = [np.unique(np.clip(V[k, i] + fine, 0.0, 1.0)) for i in range(I)]
        W = _profiles(axes)
        r = hindsight_revenue(W, gamma, M.groups) - M._pay(W).sum(axis=1)
        j = int(np.argmax(r))
        if r[j] > best_val:
            best_val, best_v = float(r[j]), W[j]
    return best_val, best_v


# --------------------------------------------------------------------------
# oracles
# --------------------------------------------------------------------------

def vertex_oracle(psi_min_max: float, psi_maj_max: float, gamma: float) -> tuple[float, float]:
    """Best of the vertices (0,0), (1,0), (gamma/(1+gamma), 1/(1+gamma)) of
    {tau_min + tau_maj <= 1, tau_min >= gamma tau_maj, tau >= 0} for the
    objective tau_min psi_min + tau_maj psi_maj; ties go to the earlier vertex."""
    w_all, w_min = equity_weights(gamma)
    vertices = [(0.0, 0.0), (1.0, 0.0), (w_min, w_all)]
    best, best_val = vertices[0], 0.0
    for t in vertices[1:]:
        val = _objective(t, psi_min_max, psi_maj_max)
        if val > best_val:
            best, best_val = t, val
    return best


def _objective(t, a, b):
    # 0 * (-inf) counts as 0: a zero share of a hopeless bidder adds nothing
    return (t[0] * a if t[0] else 0.0) + (t[1] * b if t[1] else 0.0)


def vertex_oracle_value(psi_min_max: float, psi_maj_max: float, gamma: float) -> float:
    return _objective(vertex_oracle(psi_min_max, psi_maj_max, gamma), psi_min_max, psi_maj_max)


def posted_price_revenue(prior: DiscreteDistribution) -> tuple[float, float]:
    """Best take-it-or-leave-it price on the grid for one bidder under a
    discrete prior; returns ``(revenue, price)``."""
    if prior.n != 1:
        raise ValueError("posted-price enumeration is for a single bidder")
    tail = np.cumsum(prior.mass[::-1])[::-1]
    rev = prior.grid * tail
    k = int(np.argmax(rev))
    return float(rev[k]), float(prior.grid[k])


def corner_grid(n: int = 2):
    return np.array(list(itertools.product([0.0, 1.0], repeat=n)))
