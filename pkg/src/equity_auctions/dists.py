"""Value distributions on [0, 1]: regular marginals, product joints, the
Bernoulli-corner extremal law and its contamination mixture, and grid
discretization.

All objects are immutable after construction.  Random draws always go
through an explicit ``numpy.random.Generator`` or integer seed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

REGULARITY_GRID = 1e-3
BISECTION_TOL = 1e-10
MASS_TOL = 1e-9


class RegularityError(ValueError):
    """A marginal whose virtual value decreases somewhere on [0, 1]."""


def _check_unit(v, what="value"):
    arr = np.asarray(v, dtype=float)
    if np.any(~(arr >= 0.0) | ~(arr <= 1.0)):
        raise ValueError(f"{what} must lie in [0, 1]")
    return arr


# --------------------------------------------------------------------------
# marginals
# --------------------------------------------------------------------------

class RegularMarginal:
    """One-dimensional value law supported on [0, 1] with non-decreasing
    virtual value.

    Subclasses supply ``cdf``, ``pdf`` and ``_ppf``; the virtual value and its
    generalized inverse are shared.
    """

    family: str = "abstract"

    def cdf(self, v):
        raise NotImplementedError

    def pdf(self, v):
        raise NotImplementedError

    def _ppf(self, u):
        raise NotImplementedError

    def _survival_over_density(self, v):
        v = np.asarray(v, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            return (1.0 - self.cdf(v)) / self.pdf(v)

    def virtual_value(self, v):
        """psi(v) = v - (1 - F(v)) / f(v).

        Exactly 1 at v = 1.  Where the density vanishes at v = 0 the limit
        -inf is returned.
        """
        arr = _check_unit(v)
        ratio = self._survival_over_density(arr)
        out = np.where(arr >= 1.0, 1.0, arr - ratio)
        out = np.where(np.isnan(out), -np.inf, out)
        return out if out.ndim else float(out)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return self._ppf(rng.random(n))

    def describe(self) -> dict:
        return {"family": self.family}

    def __repr__(self):
        return f"{type(self).__name__}()"


class Uniform(RegularMarginal):
    family = "uniform"

    def cdf(self, v):
        return np.clip(np.asarray(v, dtype=float), 0.0, 1.0)

    def pdf(self, v):
        return np.ones_like(np.asarray(v, dtype=float))

    def _survival_over_density(self, v):
        return 1.0 - v

    def _ppf(self, u):
        return np.asarray(u, dtype=float)

    def sample(self, rng, n):
        return rng.random(n)


class Beta22(RegularMarginal):
    """Beta(2, 2): F(v) = 3v^2 - 2v^3, f(v) = 6v(1 - v)."""

    family = "beta22"

    def cdf(self, v):
        v = np.clip(np.asarray(v, dtype=float), 0.0, 1.0)
        return v * v * (3.0 - 2.0 * v)

    def pdf(self, v):
        v = np.asarray(v, dtype=float)
        return 6.0 * v * (1.0 - v)

    def _survival_over_density(self, v):
        # 1 - F = (1 - v)^2 (1 + 2v); cancel one (1 - v) against f
        with np.errstate(divide="ignore"):
            return (1.0 - v) * (1.0 + 2.0 * v) / (6.0 * v)

    def _ppf(self, u):
        # no closed form; invert the cubic by bisection
        u = np.asarray(u, dtype=float)
        lo = np.zeros_like(u)
        hi = np.ones_like(u)
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            below = self.cdf(mid) < u
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        return 0.5 * (lo + hi)

    def sample(self, rng, n):
        return rng.beta(2.0, 2.0, size=n)


class TabulatedMarginal(RegularMarginal):
    """Density given at knots on [0, 1], linearly interpolated.

    The density is normalized to integrate to one.  Regularity is checked
    on a 1e-3 grid at construction and irregular tables are rejected.
    """

    family = "custom-table"

    def __init__(self, knots: Sequence[float], density: Sequence[float]):
        x = np.asarray(knots, dtype=float)
        f = np.asarray(density, dtype=float)
        if x.ndim != 1 or x.shape != f.shape or x.size < 2:
            raise ValueError("knots and density must be 1-d arrays of equal length >= 2")
        if x[0] != 0.0 or x[-1] != 1.0 or np.any(np.diff(x) <= 0):
            raise ValueError("knots must increase strictly from 0 to 1")
        if np.any(f < 0) or np.any(f[1:-1] <= 0):
            raise ValueError("density must be strictly positive on (0, 1)")
        seg = 0.5 * (f[1:] + f[:-1]) * np.diff(x)
        total = seg.sum()
        self._x = x
        self._f = f / total
        self._cum = np.concatenate([[0.0], np.cumsum(seg / total)])
        grid = np.linspace(0.0, 1.0, int(round(1 / REGULARITY_GRID)) + 1)
        psi = self.virtual_value(grid[1:])
        if np.any(np.diff(psi) < -1e-12):
            raise RegularityError("virtual value is not non-decreasing on [0, 1]")

    def pdf(self, v):
        return np.interp(np.asarray(v, dtype=float), self._x, self._f)

    def cdf(self, v):
        v = np.clip(np.asarray(v, dtype=float), 0.0, 1.0)
        k = np.clip(np.searchsorted(self._x, v, side="right") - 1, 0, self._x.size - 2)
        x0 = self._x[k]
        f0 = self._f[k]
        slope = (self._f[k + 1] - f0) / (self._x[k + 1] - x0)
        d = v - x0
        return np.minimum(self._cum[k] + f0 * d + 0.5 * slope * d * d, 1.0)

    def _ppf(self, u):
        u = np.asarray(u, dtype=float)
        lo = np.zeros_like(u)
        hi = np.ones_like(u)
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            below = self.cdf(mid) < u
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        return 0.5 * (lo + hi)

    def describe(self):
        return {"family": self.family, "knots": self._x.tolist(), "density": self._f.tolist()}

    def __repr__(self):
        return f"TabulatedMarginal(<{self._x.size} knots>)"


MARGINALS = {"uniform": Uniform, "beta22": Beta22}


def marginal_from_config(spec: dict) -> RegularMarginal:
    family = spec.get("family")
    if family in MARGINALS:
        return MARGINALS[family]()
    if family == "custom-table":
        return TabulatedMarginal(spec["knots"], spec["density"])
    raise ValueError(f"unknown marginal family {family!r}")


def virtual_value(d: RegularMarginal, v):
    """Virtual value of marginal ``d`` at ``v`` (scalar or array)."""
    return d.virtual_value(v)


def inverse_virtual_value(d: RegularMarginal, y, strict=False, tol=BISECTION_TOL):
    """Smallest v in [0, 1] with psi(v) >= y (or psi(v) > y if ``strict``).

    Returns 0 when the level is already met at v = 0 and ``inf`` when it is
    never met on [0, 1] (only possible for y >= psi(1) = 1).  Vectorized
    over ``y``; bisection to absolute tolerance ``tol``.
    """
    y = np.asarray(y, dtype=float)
    scalar = y.ndim == 0
    y = np.atleast_1d(y)

    def met(v, level):
        psi = d.virtual_value(v)
        return psi > level if strict else psi >= level

    at_zero = met(np.zeros_like(y), y)
    never = ~met(np.ones_like(y), y)
    lo = np.zeros_like(y)
    hi = np.ones_like(y)
    active = ~(at_zero | never)
    n_iter = int(math.ceil(math.log2(1.0 / tol))) + 1
    for _ in range(n_iter):
        mid = 0.5 * (lo + hi)
        ok = met(mid, y)
        hi = np.where(active & ok, mid, hi)
        lo = np.where(active & ~ok, mid, lo)
    out = np.where(at_zero, 0.0, np.where(never, np.inf, hi))
    return float(out[0]) if scalar else out


# --------------------------------------------------------------------------
# groups
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class GroupStructure:
    """Minority bidders occupy indices ``0 .. n_min-1``, majority bidders the
    rest."""

    n_min: int
    n_maj: int = 0

    def __post_init__(self):
        if self.n_min < 1:
            raise ValueError("at least one minority bidder is required")
        if self.n_maj < 0:
            raise ValueError("n_maj must be non-negative")

    @property
    def n(self) -> int:
        return self.n_min + self.n_maj

    @property
    def minority(self) -> slice:
        return slice(0, self.n_min)

    @property
    def majority(self) -> slice:
        return slice(self.n_min, self.n)

    def is_minority(self, i: int) -> bool:
        return i < self.n_min


# --------------------------------------------------------------------------
# joint distributions
# --------------------------------------------------------------------------

class JointValueDistribution:
    n: int

    def sample(self, n: int, seed=None) -> np.ndarray:
        raise NotImplementedError

    def describe(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class ProductDistribution(JointValueDistribution):
    marginals: tuple

    def __init__(self, marginals):
        object.__setattr__(self, "marginals", tuple(marginals))
        if not self.marginals:
            raise ValueError("need at least one marginal")

    @property
    def n(self):
        return len(self.marginals)

    def sample(self, n, seed=None):
        if n < 1:
            raise ValueError("n must be >= 1")
        rng = np.random.default_rng(seed)
        return np.column_stack([d.sample(rng, n) for d in self.marginals])

    def describe(self):
        return {"marginals": [d.describe() for d in self.marginals]}


def corner_masses(rho: float) -> dict:
    """Masses of the Bernoulli-corner law on {0,1}^2."""
    if not -1.0 <= rho <= 1.0:
        raise ValueError("rho must lie in [-1, 1]")
    same = (1.0 + rho) / 4.0
    diff = (1.0 - rho) / 4.0
    return {(0, 0): same, (0, 1): diff, (1, 0): diff, (1, 1): same}


@dataclass(frozen=True)
class ContaminatedDistribution(JointValueDistribution):
    """(1 - eps) * base + eps * corner law with correlation parameter rho."""

    base: ProductDistribution
    eps: float
    rho: float

    def __post_init__(self):
        if not 0.0 <= self.eps <= 1.0:
            raise ValueError("eps must lie in [0, 1]")
        corner_masses(self.rho)
        if self.base.n != 2:
            raise ValueError("the corner law is defined for two bidders")

    @property
    def n(self):
        return 2

    def sample(self, n, seed=None):
        if n < 1:
            raise ValueError("n must be >= 1")
        rng = np.random.default_rng(seed)
        pick_corner = rng.random(n) < self.eps
        base = np.column_stack([d.sample(rng, n) for d in self.base.marginals])
        masses = corner_masses(self.rho)
        corners = np.array(list(masses), dtype=float)
        idx = rng.choice(4, size=n, p=np.array(list(masses.values())))
        return np.where(pick_corner[:, None], corners[idx], base)

    def describe(self):
        d = self.base.describe()
        d["contamination"] = {"eps": self.eps, "rho": self.rho}
        return d


@dataclass(frozen=True, eq=False)
class DiscreteDistribution(JointValueDistribution):
    """Masses on the regular grid {0, delta, ..., 1}^n.

    ``mass`` has shape ``(k+1,) * n``; ``mass[j1, ..., jn]`` belongs to the
    profile ``(grid[j1], ..., grid[jn])``.
    """

    grid: np.ndarray
    mass: np.ndarray
    label: dict = field(default_factory=dict)

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        mass = np.asarray(self.mass, dtype=float)
        if mass.shape != (grid.size,) * mass.ndim:
            raise ValueError("mass table shape does not match the grid")
        if np.any(mass < -MASS_TOL):
            raise ValueError("masses must be non-negative")
        if abs(mass.sum() - 1.0) > MASS_TOL:
            raise ValueError(f"masses sum to {mass.sum()!r}, not 1")
        grid.setflags(write=False)
        mass = np.maximum(mass, 0.0)
        mass.setflags(write=False)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "mass", mass)

    @property
    def n(self):
        return self.mass.ndim

    @property
    def delta(self):
        return float(self.grid[1] - self.grid[0])

    def profiles(self) -> np.ndarray:
        """All grid profiles in C order, shape ``(len(grid)**n, n)``."""
        mesh = np.meshgrid(*([self.grid] * self.n), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def weights(self) -> np.ndarray:
        return self.mass.ravel()

    def sample(self, n, seed=None):
        if n < 1:
            raise ValueError("n must be >= 1")
        rng = np.random.default_rng(seed)
        idx = rng.choice(self.mass.size, size=n, p=self.weights() / self.weights().sum())
        return self.profiles()[idx]

    def describe(self):
        return {"discrete_grid_step": self.delta, **self.label}


def grid_steps(delta: float) -> int:
    """Number of cells k for a grid step of 1/k; rejects anything else."""
    if not 0 < delta <= 0.5:
        raise ValueError("grid step must be 1/k for an integer k >= 2")
    k = Fraction(delta).limit_denominator(100_000)
    if k.numerator != 1 or abs(float(k) - delta) > 1e-12:
        raise ValueError("grid step must be 1/k for an integer k >= 2")
    return k.denominator


def unit_grid(delta: float) -> np.ndarray:
    k = grid_steps(delta)
    return np.arange(k + 1) / k


def _product_masses(marginals, grid):
    tables = []
    for d in marginals:
        cdf = d.cdf(grid)
        # cell of grid point g is (g - delta, g]; the point {0} gets F(0)
        tables.append(np.diff(np.concatenate([[0.0], cdf])))
    mass = tables[0]
    for t in tables[1:]:
        mass = np.multiply.outer(mass, t)
    return mass


def discretize(J: JointValueDistribution, delta: float) -> DiscreteDistribution:
    """Put on every grid point the mass of its lower-left cell."""
    grid = unit_grid(delta)
    if isinstance(J, ProductDistribution):
        mass = _product_masses(J.marginals, grid)
    elif isinstance(J, ContaminatedDistribution):
        mass = (1.0 - J.eps) * _product_masses(J.base.marginals, grid)
        k = grid.size - 1
        for (a, b), p in corner_masses(J.rho).items():
            mass[a * k, b * k] += J.eps * p
    else:
        raise TypeError("discretize expects a product or contaminated distribution")
    return DiscreteDistribution(grid, mass, label=J.describe())


def distribution_from_config(cfg: dict) -> JointValueDistribution:
    """Build a joint law from ``{"marginals": [...], "contamination": {...}}``."""
    base = ProductDistribution(marginal_from_config(m) for m in cfg["marginals"])
    cont = cfg.get("contamination")
    if cont is None:
        return base
    return ContaminatedDistribution(base, float(cont["eps"]), float(cont["rho"]))


def sample_joint(J: JointValueDistribution, n: int, seed: int) -> np.ndarray:
    return J.sample(n, seed)
