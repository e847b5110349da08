"""The set-aside optimal mechanism q* and the regret-based q-hat on a few
profiles with one minority and one majority bidder."""
import numpy as np

from equity_auctions import (Beta22, GroupStructure, RobustMechanism, StochasticMechanism, audit_feasibility,
                             ex_post_regret, theta)

groups = GroupStructure(1, 1)
gamma = 0.25
star = StochasticMechanism(groups, gamma, [Beta22(), Beta22()])
hat = RobustMechanism(groups, gamma)

V = np.array([[0.9, 0.2], [0.3, 0.8], [0.6, 0.6], [0.1, 0.95]])
for name, M in (("q*", star), ("q-hat", hat)):
    print(name)
    q, m = M.allocate(V), M.pay(V)
    for v, qi, mi in zip(V, q, m):
        print(f"  v {v}  q {np.round(qi, 4)}  m {np.round(mi, 4)}")
    print(f"  ex-post regret {np.round(ex_post_regret(M, V), 4)}")

print(f"theta({gamma}) = {theta(gamma):.6f} bounds the regret of q-hat")
print("audit of q-hat on a 0.05 grid:", audit_feasibility(hat, 0.05).counts() or "no violations")
