"""Command-line interface.

Subcommands: bounds, evaluate, stress, lp-solve, audit, worst-case.  Every
CSV starts with ``#`` lines carrying the command, a hash of its resolved
configuration and the seed, so identical invocations give identical files.
Exit status: 0 success, 1 violations found (audit), 2 invalid input.
"""
from __future__ import annotations

import argparse
import functools
import os
import sys

from . import __version__
from .bounds import factor_curve
from .config import OUTPUT_DIR_ENV, ConfigError, ExperimentConfig, config_digest
from .dists import (ContaminatedDistribution, GroupStructure, ProductDistribution, discretize,
                    grid_steps, marginal_from_config)
from .evaluation import EvaluationReport, evaluate, normalized_revenue_sweep, worst_case_regret, write_sweep_csv
from .lp import LPSizeError, LPSolveError, assemble_lp, optimal_grid_mechanism, solve_lp, tailored_mechanism
from .mech import ZeroMechanism, audit_feasibility
from .robust import RobustMechanism
from .stochastic import StochasticMechanism

MECHANISMS = ("stochastic", "robust", "lp-ex-post", "lp-expectation", "zero")


class UsageError(Exception):
    pass


def _out_path(args, name):
    d = args.out_dir or os.environ.get(OUTPUT_DIR_ENV) or "."
    os.makedirs(d, exist_ok=True)
    return os.path.join(d, name)


def _provenance(command, settings, seed=None):
    return [f"command: {command}", f"config: {config_digest(settings)}",
            f"seed: {'none' if seed is None else seed}"]


def _groups(text):
    try:
        n_min, n_maj = (int(x) for x in text.split(","))
        return GroupStructure(n_min, n_maj)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"groups must be 'n_min,n_maj': {exc}") from None


def _marginals(text, groups):
    names = [s.strip() for s in text.split(",") if s.strip()]
    if len(names) == 1:
        names *= groups.n
    if len(names) != groups.n:
        raise UsageError(f"need {groups.n} marginals, got {len(names)}")
    try:
        return [marginal_from_config({"family": n}) for n in names]
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _check_delta(delta):
    try:
        grid_steps(delta)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _common(p, marginals=True, delta=0.02):
    p.add_argument("--gamma", type=float, default=0.25, help="equity level (default 0.25)")
    p.add_argument("--groups", type=_groups, default=GroupStructure(1, 1),
                   help="minority and majority bidder counts, e.g. 1,1 (default)")
    if marginals:
        p.add_argument("--marginals", default="beta22",
                       help="comma-separated families (uniform, beta22); one name applies to all")
    p.add_argument("--delta", type=float, default=delta, help=f"grid step 1/k (default {delta})")
    p.add_argument("--out-dir", default=None, help=f"output directory (else ${OUTPUT_DIR_ENV}, else .)")


def _settings(args, *keys):
    out = {}
    for k in keys:
        v = getattr(args, k)
        out[k] = [v.n_min, v.n_maj] if isinstance(v, GroupStructure) else v
    return out


def _mechanism(kind, groups, gamma, marginals, delta):
    if gamma < 0:
        raise UsageError("gamma must be non-negative")
    if kind == "robust":
        return RobustMechanism(groups, gamma)
    if kind == "zero":
        return ZeroMechanism(groups, gamma)
    if kind == "stochastic":
        return StochasticMechanism(groups, gamma, marginals)
    if kind in ("lp-ex-post", "lp-expectation"):
        _check_delta(delta)
        prior = discretize(ProductDistribution(marginals), delta)
        M, _, _ = optimal_grid_mechanism(prior, groups, gamma, kind[3:], name=kind)
        return M
    raise UsageError(f"unknown mechanism {kind!r}; choose from {', '.join(MECHANISMS)}")


# -- subcommands --------------------------------------------------------------

def cmd_bounds(args):
    if args.points < 2:
        raise UsageError("--points must be at least 2")
    if not 0 <= args.gamma_min < args.gamma_max:
        raise UsageError("need 0 <= --gamma-min < --gamma-max")
    spacing = "log" if args.log else args.spacing
    try:
        curve = factor_curve(args.gamma_min, args.gamma_max, args.points, spacing)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    settings = {"gamma_min": args.gamma_min, "gamma_max": args.gamma_max, "points": args.points,
                "spacing": spacing}
    path = _out_path(args, "bounds.csv")
    curve.write_csv(path, _provenance("bounds", settings))
    print(f"max factor {curve.max:.6f} at gamma = {curve.argmax:.6g}  ->  {path}")
    return 0


def cmd_evaluate(args):
    marginals = _marginals(args.marginals, args.groups)
    if not 0 <= args.eps <= 1 or not -1 <= args.rho <= 1:
        raise UsageError("need 0 <= eps <= 1 and -1 <= rho <= 1")
    base = ProductDistribution(marginals)
    J = ContaminatedDistribution(base, args.eps, args.rho) if args.eps > 0 else base
    _check_delta(args.delta)
    if args.mode == "exhaustive-grid":
        J = discretize(J, args.delta)
    reports = []
    for kind in args.mech:
        M = _mechanism(kind, args.groups, args.gamma, marginals, args.delta)
        reports.append(evaluate(M, J, args.gamma, args.mode, args.samples, args.seed))
        print(reports[-1].summary())
    settings = _settings(args, "mech", "gamma", "groups", "marginals", "delta", "eps", "rho", "mode", "samples")
    path = _out_path(args, "evaluation.csv")
    seed = args.seed if args.mode == "monte-carlo" else None
    EvaluationReport.write_csv(reports, path, _provenance("evaluate", settings, seed))
    print(f"-> {path}")
    return 0


def cmd_stress(args):
    try:
        cfg = ExperimentConfig.load(args.config)
    except ConfigError as exc:
        raise UsageError(str(exc)) from None
    out_dir = cfg.output_dir(args.out_dir)
    os.makedirs(out_dir, exist_ok=True)
    groups, gamma, marginals, delta = cfg.groups, cfg.gamma, cfg.marginals, cfg.delta
    backend = cfg.lp_backend
    qbar, _, _ = optimal_grid_mechanism(discretize(ProductDistribution(marginals), delta), groups,
                                        gamma, "expectation", backend=backend, name="lp-expectation")
    mechs = {"stochastic": StochasticMechanism(groups, gamma, marginals),
             "lp-expectation": qbar,
             "robust": RobustMechanism(groups, gamma)}
    rows = []
    for rho in cfg.rho:
        rows += normalized_revenue_sweep(mechs, marginals, gamma, cfg.eps, rho, delta, groups,
                                         functools.partial(tailored_mechanism, backend=backend))
    header = ["command: stress", f"config: {cfg.digest()}", f"seed: {cfg.seed}"]
    rev = os.path.join(out_dir, "stress_revenue.csv")
    reg = os.path.join(out_dir, "stress_regret_p75.csv")
    write_sweep_csv(rows, rev, "normalized", header)
    write_sweep_csv(rows, reg, "regret", header)
    failed = [r for r in rows if r.error]
    for r in rows:
        cells = "  ".join(f"{k}={v:.4f}" for k, v in r.normalized.items())
        print(f"eps={r.eps:.2f} rho={r.rho:+.2f}  {cells}{'  ERROR ' + r.error if r.error else ''}")
    print(f"-> {rev}\n-> {reg}")
    if failed:
        print(f"{len(failed)} LP solve(s) failed; see the error column", file=sys.stderr)
    return 0


def cmd_lp_solve(args):
    marginals = _marginals(args.marginals, args.groups)
    _check_delta(args.delta)
    if not 0 <= args.eps <= 1 or not -1 <= args.rho <= 1:
        raise UsageError("need 0 <= eps <= 1 and -1 <= rho <= 1")
    base = ProductDistribution(marginals)
    J = ContaminatedDistribution(base, args.eps, args.rho) if args.eps > 0 else base
    prior = discretize(J, args.delta)
    ic = args.ic if args.ic != "auto" else ("full" if prior.grid.size <= 11 else "adjacent")
    try:
        L = assemble_lp(prior, args.groups, args.gamma, args.equity, ic, args.max_rows)
    except LPSizeError as exc:
        raise UsageError(str(exc)) from None
    settings = _settings(args, "gamma", "groups", "marginals", "delta", "eps", "rho", "equity")
    settings["ic"] = ic
    if args.dump:
        L.write_triples(_out_path(args, "lp_triples.csv"))
    M, revenue, res = solve_lp(L, args.backend)
    path = _out_path(args, "mechanism.csv")
    M.write_csv(path, _provenance("lp-solve", settings))
    print(f"expected revenue {revenue:.9f}  vars={L.n_vars} rows={L.n_rows} backend={res.backend} "
          f"kkt(primal,dual,comp)=({res.kkt.primal:.1e},{res.kkt.dual:.1e},{res.kkt.complementarity:.1e})")
    print(f"-> {path}")
    return 0


def cmd_audit(args):
    marginals = _marginals(args.marginals, args.groups)
    M = _mechanism(args.mech, args.groups, args.gamma, marginals, args.delta)
    report = audit_feasibility(M, args.delta, args.tol, n_samples=args.samples,
                               quad_profiles=args.quad_profiles, seed=args.seed)
    path = _out_path(args, "audit.csv")
    report.write_csv(path)
    counts = report.counts()
    if report.ok:
        print(f"{M.name}: {report.profiles_checked} profiles, no violations at tol {args.tol:g}  -> {path}")
        return 0
    print(f"{M.name}: violations " + ", ".join(f"{k}={v}" for k, v in sorted(counts.items())) + f"  -> {path}")
    return 1


def cmd_worst_case(args):
    marginals = _marginals(args.marginals, args.groups)
    if args.groups.n > 3:
        raise UsageError("worst-case search supports at most three bidders")
    M = _mechanism(args.mech, args.groups, args.gamma, marginals, args.lp_delta)
    _check_delta(args.delta)
    value, v = worst_case_regret(M, args.delta)
    print(f"{M.name}: worst-case regret {value:.9f} at v = ({', '.join(f'{x:.6g}' for x in v)})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="equity-auctions",
                                     description="Equity-constrained single-good auctions.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bounds", help="approximation factor curve of the regret-based mechanism")
    p.add_argument("--gamma-min", type=float, default=0.0)
    p.add_argument("--gamma-max", type=float, default=10.0)
    p.add_argument("--points", type=int, default=1001)
    p.add_argument("--spacing", choices=("linear", "log", "mixed"), default="linear")
    p.add_argument("--log", action="store_true", help="shorthand for --spacing log")
    p.add_argument("--out-dir", default=None)
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("evaluate", help="revenue, regret and equity report")
    p.add_argument("--mech", nargs="+", default=["stochastic", "robust"], choices=MECHANISMS)
    _common(p)
    p.add_argument("--eps", type=float, default=0.0)
    p.add_argument("--rho", type=float, default=0.0)
    p.add_argument("--mode", choices=("exhaustive-grid", "monte-carlo"), default="exhaustive-grid")
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("stress", help="contamination sweep from a config file")
    p.add_argument("config")
    p.add_argument("--out-dir", default=None)
    p.set_defaults(func=cmd_stress)

    p = sub.add_parser("lp-solve", help="solve a grid mechanism LP and write the table")
    _common(p)
    p.add_argument("--eps", type=float, default=0.0)
    p.add_argument("--rho", type=float, default=0.0)
    p.add_argument("--equity", choices=("ex-post", "expectation"), default="ex-post")
    p.add_argument("--ic", choices=("auto", "full", "adjacent"), default="auto")
    p.add_argument("--backend", choices=("auto", "simplex", "highs", "highs-ipm"), default="auto")
    p.add_argument("--max-rows", type=int, default=500_000)
    p.add_argument("--dump", action="store_true", help="also write the LP as sparse triples")
    p.set_defaults(func=cmd_lp_solve)

    p = sub.add_parser("audit", help="check IC, IR, AF and equity")
    p.add_argument("--mech", default="robust", choices=MECHANISMS)
    _common(p)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--samples", type=int, default=100_000, help="sampled profiles for four or more bidders")
    p.add_argument("--quad-profiles", type=int, default=None, help="cap on profiles given the quadrature check")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("worst-case", help="worst-case ex-post regret by grid search")
    p.add_argument("--mech", default="robust", choices=MECHANISMS)
    _common(p, delta=0.005)
    p.add_argument("--lp-delta", type=float, default=0.05, help="grid step of LP mechanisms")
    p.set_defaults(func=cmd_worst_case)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        parser.print_usage(sys.stderr)
        print(f"{parser.prog} {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except LPSolveError as exc:
        print(f"LP solve failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
