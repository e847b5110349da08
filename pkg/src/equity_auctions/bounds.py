"""Regret guarantee of the regret-based mechanism as a function of gamma.

The worst-case regret of the mechanism is at most ``theta(gamma)``, and no
mechanism does better than 1/e, so ``e * theta`` is its approximation factor.
``theta`` is the maximum of a concave univariate objective over
``u in [1/e, 1]``; its stationary point ``u_star`` is found by bisection.
"""
from __future__ import annotations

import csv
from typing import NamedTuple

import numpy as np

INV_E = np.exp(-1.0)
ROOT_TOL = 1e-12


def _check_gamma(gamma):
    g = np.asarray(gamma, dtype=float)
    if np.any(~np.isfinite(g)) or np.any(g < 0):
        raise ValueError("gamma must be finite and non-negative")
    return g


def _log_mix(gamma, u):
    # log((1 + gamma u) / (1 + gamma)), written to stay accurate for huge gamma
    return np.log1p(-gamma * (1.0 - u) / (1.0 + gamma))


def stationarity_residual(gamma, u):
    """Derivative of :func:`bound_objective` in ``u``."""
    gamma = np.asarray(gamma, dtype=float)
    return gamma / (1.0 + gamma) * _log_mix(gamma, u) - np.log(u) - 1.0 / (1.0 + gamma)


def beta_star(gamma):
    g = _check_gamma(gamma)
    out = np.maximum(1.0 / (1.0 + g), INV_E)
    return float(out) if out.ndim == 0 else out


def bound_objective(gamma, u):
    """Regret bound as a function of the free minority value ``u``;
    concave on [1/e, 1] and maximized at ``u_star``."""
    gamma = np.asarray(gamma, dtype=float)
    u = np.asarray(u, dtype=float)
    z = (1.0 + gamma * u) / (1.0 + gamma)
    b = np.maximum(1.0 / (1.0 + gamma), INV_E)
    return z * _log_mix(gamma, u) - u * np.log(u) - b * np.log(b)


def u_star(gamma, tol: float = ROOT_TOL):
    """Root of the stationarity condition on [1/e, 1] (vectorized bisection).

    The residual is non-negative at 1/e and equals -1/(1+gamma) < 0 at 1, so
    the bracket always holds; at gamma = 0 the root is 1/e itself.
    """
    g = _check_gamma(gamma)
    lo = np.full(g.shape, INV_E)
    hi = np.ones(g.shape)
    while np.any(hi - lo > tol):
        mid = 0.5 * (lo + hi)
        pos = stationarity_residual(g, mid) > 0
        lo = np.where(pos, mid, lo)
        hi = np.where(pos, hi, mid)
    out = 0.5 * (lo + hi)
    # snap to the left end when the residual there is already non-positive
    out = np.where(stationarity_residual(g, INV_E) <= 0, INV_E, out)
    return float(out) if out.ndim == 0 else out


def theta(gamma):
    g = _check_gamma(gamma)
    out = bound_objective(g, u_star(g))
    return float(out) if np.ndim(out) == 0 else out


class BoundsSummary(NamedTuple):
    gamma: float
    u_star: float
    beta_star: float
    theta: float
    factor: float


def bounds_summary(gamma: float) -> BoundsSummary:
    u = u_star(gamma)
    t = float(bound_objective(gamma, u))
    return BoundsSummary(float(gamma), u, beta_star(gamma), t, np.e * t)


class FactorCurve(NamedTuple):
    gamma: np.ndarray
    u_star: np.ndarray
    beta_star: np.ndarray
    theta: np.ndarray
    factor: np.ndarray

    @property
    def argmax(self) -> float:
        return float(self.gamma[np.argmax(self.factor)])

    @property
    def max(self) -> float:
        return float(self.factor.max())

    def rows(self):
        for k in range(self.gamma.size):
            yield BoundsSummary(*(float(a[k]) for a in self))

    def write_csv(self, path, header_lines=(), digits: int = 12):
        with open(path, "w", newline="") as fh:
            for line in header_lines:
                fh.write(f"# {line}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(BoundsSummary._fields)
            for row in self.rows():
                w.writerow([f"{x:.{digits}g}" for x in row])


def gamma_grid(gamma_min: float, gamma_max: float, n_points: int, spacing: str = "mixed"):
    """Grid of equity levels.

    ``linear`` and ``log`` are what they say (``log`` needs gamma_min > 0);
    ``mixed`` is linear on the part below 1 and log-spaced above, splitting
    the points in proportion to the two lengths on the log10(1 + gamma) scale.
    """
    if not (0 <= gamma_min < gamma_max) or not np.isfinite(gamma_max):
        raise ValueError("need 0 <= gamma_min < gamma_max < inf")
    if n_points < 2:
        raise ValueError("need at least two points")
    if spacing == "linear":
        return np.linspace(gamma_min, gamma_max, n_points)
    if spacing == "log":
        if gamma_min <= 0:
            raise ValueError("log spacing needs gamma_min > 0")
        return np.geomspace(gamma_min, gamma_max, n_points)
    if spacing != "mixed":
        raise ValueError(f"unknown spacing {spacing!r}")
    if gamma_max <= 1 or gamma_min >= 1:
        lin = gamma_max <= 1 or gamma_min == 0
        return gamma_grid(gamma_min, gamma_max, n_points, "linear" if lin else "log")
    s = np.log10(1 + np.array([gamma_min, 1.0, gamma_max]))
    n_lin = int(np.clip(round(n_points * (s[1] - s[0]) / (s[2] - s[0])), 1, n_points - 1))
    left = np.linspace(gamma_min, 1.0, n_lin, endpoint=False)
    right = np.geomspace(1.0, gamma_max, n_points - n_lin)
    return np.concatenate([left, right])


def factor_curve(gamma_min: float = 0.0, gamma_max: float = 10.0, n_points: int = 1001,
                 spacing: str = "linear") -> FactorCurve:
    g = gamma_grid(gamma_min, gamma_max, n_points, spacing)
    u = np.asarray(u_star(g))
    t = np.asarray(bound_objective(g, u))
    return FactorCurve(g, u, np.asarray(beta_star(g)), t, np.e * t)
