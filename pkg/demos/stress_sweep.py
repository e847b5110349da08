"""Normalized revenue under corner contamination, on a coarse grid so it
runs in seconds. The stress command reproduces the full 0.02 grid.
q-bar only meets equity in expectation, so it can beat the ex-post tailored
benchmark and score above 1."""
from equity_auctions import Beta22, GroupStructure, RobustMechanism, StochasticMechanism
from equity_auctions.evaluation import normalized_revenue_sweep
from equity_auctions.lp import expectation_mechanism

marg = [Beta22(), Beta22()]
gamma, delta = 0.25, 0.1
qbar, _, _ = expectation_mechanism(delta, gamma, marg)
mechs = {"q*": StochasticMechanism(GroupStructure(1, 1), gamma, marg), "q-bar": qbar,
         "q-hat": RobustMechanism(GroupStructure(1, 1), gamma)}
rows = normalized_revenue_sweep(mechs, marg, gamma, [0.0, 0.25, 0.5, 0.75, 1.0], 0.0, delta)
print("eps   " + "  ".join(f"{k:>7}" for k in mechs))
for r in rows:
    print(f"{r.eps:<5} " + "  ".join(f"{r.normalized[k]:7.4f}" for k in mechs))
