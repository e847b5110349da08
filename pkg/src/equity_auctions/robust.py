"""Distribution-free regret-based mechanism.

Only the top minority bidder and the top majority bidder can be served.
When the majority top strictly exceeds the minority top, the two share
``(1 + log l(v))^+`` in proportion gamma : 1, where ``l(v)`` is the
gamma-weighted mix of the two group tops; otherwise the minority top gets
``(1 + log v)^+`` alone.

Payments come from the envelope formula in closed form.  Every integral of
the allocation reduces, after an affine change of variable, to
``int (1 + log z)^+ dz``, whose antiderivative on z >= 1/e is ``z log z``.
"""
from __future__ import annotations

import numpy as np

from .dists import GroupStructure
from .mech import INV_E, Mechanism, as_profiles, equity_weights


def log_share(z):
    """(1 + log z)^+ with the clamp at z <= 1/e."""
    z = np.asarray(z, dtype=float)
    return np.where(z > INV_E, 1.0 + np.log(np.maximum(z, INV_E)), 0.0)


def _zlogz(z):
    return z * np.log(z)


def clamped_log_integral(z1, z2):
    """int_{z1}^{z2} (1 + log z)^+ dz for z1 <= z2 (zero when z2 <= z1)."""
    z1 = np.maximum(np.asarray(z1, dtype=float), INV_E)
    z2 = np.maximum(np.asarray(z2, dtype=float), INV_E)
    return np.where(z2 > z1, _zlogz(z2) - _zlogz(z1), 0.0)


def _tops(V, groups):
    rows = np.arange(V.shape[0])
    i_min = np.argmax(V[:, groups.minority], axis=1)
    v_min = V[rows, i_min]
    if groups.n_maj:
        i_maj = groups.n_min + np.argmax(V[:, groups.majority], axis=1)
        v_maj = V[rows, i_maj]
    else:
        i_maj = np.full(V.shape[0], -1)
        v_maj = np.full(V.shape[0], -np.inf)
    return rows, i_min, v_min, i_maj, v_maj


def _second(V, cols, exclude):
    """Largest value among ``cols`` other than column ``exclude`` per row
    (0 when no other column exists)."""
    sub = V[:, cols].copy()
    if sub.shape[1] <= 1:
        return np.zeros(V.shape[0])
    sub[np.arange(V.shape[0]), exclude] = -np.inf
    return sub.max(axis=1)


def ell(v, gamma: float, groups: GroupStructure):
    """gamma/(1+gamma) * (minority top) + 1/(1+gamma) * (majority top)."""
    if groups.n_maj < 1:
        raise ValueError("ell needs both groups to be non-empty")
    V, single = as_profiles(v, groups)
    w_all, w_min = equity_weights(gamma)
    _, _, v_min, _, v_maj = _tops(V, groups)
    out = w_min * v_min + w_all * v_maj
    return float(out[0]) if single else out


class RobustMechanism(Mechanism):
    """Regret-based mechanism; needs no distributional input."""

    name = "robust"

    def _benchmark_share(self, V):
        """Return (rows, i_min, i_maj, majority_branch, (1 + log lbar)^+)."""
        w_all, w_min = equity_weights(self.gamma)
        rows, i_min, v_min, i_maj, v_maj = _tops(V, self.groups)
        branch = v_maj > v_min
        lbar = np.where(branch, w_min * v_min + w_all * np.where(branch, v_maj, 0.0), v_min)
        return rows, i_min, i_maj, branch, log_share(lbar)

    def _components(self, V):
        rows, i_min, _, _, share = self._benchmark_share(V)
        q_all = np.zeros_like(V)
        q_min = np.zeros_like(V)
        q_all[rows, np.argmax(V, axis=1)] = share
        q_min[rows, i_min] = share
        return q_all, q_min

    def _allocate(self, V):
        # defined as the set-aside recomposition so the two agree bit for bit
        w_all, w_min = equity_weights(self.gamma)
        q_all, q_min = self._components(V)
        return w_all * q_all + w_min * q_min

    def set_aside(self, v):
        """Return ``(q_all, q_min)``: the all-bidder and minority-only parts,
        each serving its top bidder with weight (1 + log lbar)^+."""
        V, single = as_profiles(v, self.groups)
        q_all, q_min = self._components(V)
        return (q_all[0], q_min[0]) if single else (q_all, q_min)

    def _pay(self, V):
        g = self.groups
        w_all, w_min = equity_weights(self.gamma)
        rows, i_min, v_min, i_maj, v_maj = _tops(V, g)
        q = self._allocate(V)
        m = np.zeros_like(V)

        # top minority bidder: own value x, own-group threshold a, majority top b
        x = v_min
        a = _second(V, g.minority, i_min)
        b = v_maj
        branch = b > x
        b0 = np.where(np.isfinite(b), b, 0.0)
        # region a <= t < b: share is w_min (1 + log(w_min t + w_all b))^+
        upper = np.where(branch, x, np.minimum(x, b0))
        shared = np.where(np.isfinite(b) & (upper > a),
                          clamped_log_integral(w_min * a + w_all * b0, w_min * upper + w_all * b0),
                          0.0)
        # region max(a, b) <= t <= x: share is (1 + log t)^+
        alone = np.where(branch, 0.0, clamped_log_integral(np.maximum(a, b0), x))
        m[rows, i_min] = x * q[rows, i_min] - shared - alone

        if g.n_maj:
            c = _second(V, g.majority, i_maj - g.n_min)
            y = v_maj
            start = np.maximum(c, v_min)
            integral = clamped_log_integral(w_min * v_min + w_all * start, w_min * v_min + w_all * y)
            pay_maj = y * q[rows, i_maj] - integral
            m[rows[branch], i_maj[branch]] = pay_maj[branch]
        return m


def allocate_hat(R: RobustMechanism, v):
    return R.allocate(v)


def pay_hat(R: RobustMechanism, v):
    return R.pay(v)


def set_aside_decompose_hat(R: RobustMechanism, v):
    return R.set_aside(v)
