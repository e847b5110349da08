"""Equity-constrained single-good auctions: the revenue-optimal set-aside
mechanism, a distribution-free regret-based mechanism, their regret
guarantee, grid LP benchmarks and evaluation tools."""

__version__ = "0.1.0"

from .bounds import BoundsSummary, beta_star, bounds_summary, factor_curve, theta, u_star
from .dists import (Beta22, ContaminatedDistribution, DiscreteDistribution, GroupStructure,
                    ProductDistribution, RegularMarginal, TabulatedMarginal, Uniform, discretize,
                    inverse_virtual_value, sample_joint, virtual_value)
from .evaluation import (EvaluationReport, evaluate, normalized_revenue_sweep, vertex_oracle,
                         worst_case_regret)
from .lp import (GridMechanismLP, TabulatedMechanism, assemble_lp, expectation_mechanism,
                 optimal_grid_mechanism, solve_lp, tailored_mechanism)
from .mech import (AuditReport, HindsightMechanism, Mechanism, ZeroMechanism, audit_feasibility,
                   ex_post_regret, hindsight_revenue)
from .robust import RobustMechanism, allocate_hat, ell, pay_hat, set_aside_decompose_hat
from .stochastic import (StochasticMechanism, allocate_star, expected_revenue_star, pay_star,
                         set_aside_decompose_star)

__all__ = [
    "AuditReport", "Beta22", "BoundsSummary", "ContaminatedDistribution", "DiscreteDistribution",
    "EvaluationReport", "GridMechanismLP", "GroupStructure", "HindsightMechanism", "Mechanism",
    "ProductDistribution", "RegularMarginal", "RobustMechanism", "StochasticMechanism",
    "TabulatedMarginal", "TabulatedMechanism", "Uniform", "ZeroMechanism", "allocate_hat",
    "allocate_star", "assemble_lp", "audit_feasibility", "beta_star", "bounds_summary", "discretize",
    "ell", "evaluate", "ex_post_regret", "expectation_mechanism", "expected_revenue_star",
    "factor_curve", "hindsight_revenue", "inverse_virtual_value", "normalized_revenue_sweep",
    "optimal_grid_mechanism", "pay_hat", "pay_star", "sample_joint", "set_aside_decompose_hat",
    "set_aside_decompose_star", "solve_lp", "tailored_mechanism", "theta", "u_star", "vertex_oracle",
    "virtual_value", "worst_case_regret",
]
