"""Approximation factor e*theta(gamma) of the regret-based mechanism.

The factor is 1 with no equity constraint, peaks a little above 1.3 near
gamma = 0.9 and returns to 1 as gamma grows.
"""
from equity_auctions import bounds_summary, factor_curve

curve = factor_curve(0.0, 10.0, 1001)
print(f"max e*theta = {curve.max:.6f} at gamma = {curve.argmax:.3f}")
for g in (0.0, 0.25, 0.91, 4.0, 1e4):
    s = bounds_summary(g)
    print(f"gamma {g:>8g}: u* {s.u_star:.6f}  theta {s.theta:.6f}  e*theta {s.factor:.6f}")
