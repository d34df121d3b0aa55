"""Command-line front end: ``run``, ``bounds`` and ``verify-front``.

Exit codes: 0 success, 1 invalid configuration or input, 2 iteration cap
reached, 3 search/subsolver failure, 4 front verification failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .archive import EvaluatedPoint, Front, dominates, nondominated_filter, reporting_hypervolume
from .drivers import RunConfig, bounds_for_trace, certify_eps_stationary, compute_bounds, empirical_counts, run
from .errors import ConfigurationError, InputError, ParetoHopError
from .problems import BUILTIN_PROBLEMS, builtin_problem
from .search import RSParams, trials_to_csv
from .serialize import dumps

log = logging.getLogger("paretohop")

EXIT_OK, EXIT_CONFIG, EXIT_KMAX, EXIT_SEARCH, EXIT_VERIFY = 0, 1, 2, 3, 4


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad flags, which would collide with the k_max code.
    def error(self, message):
        raise ConfigurationError(message)


def _floats(text):
    try:
        vals = [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals[0] if len(vals) == 1 else vals


def _points(text):
    try:
        return [np.array([float(v) for v in chunk.split(",")]) for chunk in str(text).split(";") if chunk.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"malformed point list {text!r}") from None


def _add_problem_args(p):
    p.add_argument("--problem", default="jos1", help=f"one of {sorted(BUILTIN_PROBLEMS)}")
    p.add_argument("--n", type=int, default=2, help="decision space dimension")
    p.add_argument("--x0", type=_points, default=None, help="start points 'a,b;c,d' (default: problem's)")


def _add_rs_args(p):
    p.add_argument("--algo", "--algorithm", dest="algo", default="hop", choices=["hop", "lhop"])
    p.add_argument("--p", type=int, default=1, help="model order")
    p.add_argument("--eps", type=float, default=1e-3, help="stationarity threshold")
    p.add_argument("--eta", type=float, default=0.5, help="sufficient-decrease fraction in (0,1)")
    p.add_argument("--gamma", type=float, default=0.5, help="regularisation divisor in (0,1)")
    p.add_argument("--sigma-l", type=_floats, default=1.0)
    p.add_argument("--sigma-u", type=_floats, default=4.0)
    p.add_argument("--sigma-init", default="lower", choices=["lower", "midpoint", "warm"])
    p.add_argument("--tau", type=float, default=1e-2)
    p.add_argument("--delta-bar", type=float, default=2.0)
    p.add_argument("--j-max", type=int, default=200)
    p.add_argument("--subsolver", default="auto", choices=["auto", "exact", "inexact"])
    p.add_argument("--alpha", type=float, default=1.0, help="reference point offset")
    p.add_argument("--lhop-selection", default="max_stationarity",
                   choices=["max_stationarity", "round_robin", "random"])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--k-max", type=int, default=1000)


def build_parser():
    parser = _Parser(prog="paretohop", description="Regularised Pareto front search (HOP/LHOP).")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    prun = sub.add_parser("run", help="run HOP or LHOP and write artifacts")
    prun.add_argument("--config", default=None, help="key=value file; flags override it")
    _add_problem_args(prun)
    _add_rs_args(prun)
    prun.add_argument("--out", default="out", help="output directory")
    prun.add_argument("--formats", default="json,csv", help="front formats: json, csv or both")
    prun.add_argument("--threads", type=int, default=1)

    pb = sub.add_parser("bounds", help="evaluate the complexity bounds")
    pb.add_argument("--config", default=None)
    _add_problem_args(pb)
    _add_rs_args(pb)
    pb.add_argument("--L", type=_floats, default=None, help="Lipschitz constants of the order-p derivatives")
    pb.add_argument("--out", default="out")

    pv = sub.add_parser("verify-front", help="check stationarity and nondominance of a front file")
    pv.add_argument("--front", required=True, help="front.json or front.csv")
    pv.add_argument("--problem", default="jos1")
    pv.add_argument("--n", type=int, default=2)
    pv.add_argument("--eps", type=float, default=1e-3)
    pv.add_argument("--report", default=None, help="report path (default: next to the front file)")
    return parser


def read_config_file(path):
    """Parse a flat ``key=value`` file (``#`` comments) into a dict of raw strings."""
    values = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config file: {exc}", field="config") from None
    for num, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"{path}:{num}: expected key=value", field="config")
        key, value = (t.strip() for t in line.split("=", 1))
        values[key.replace("_", "-")] = value
    return values


def parse_args(argv):
    """Parse argv, applying any ``--config`` file underneath the explicit flags."""
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        file_values = read_config_file(args.config)
        flags = []
        for key, value in file_values.items():
            if key in ("config",):
                continue
            flags.append(f"--{key}={value}")
        # Re-parse: file values first, then the explicit command line wins.
        args = parser.parse_args([argv[0]] + flags + list(argv[1:]))
    return args


def _rsparams(args):
    return RSParams(
        eta=args.eta, gamma=args.gamma, sigma_l=args.sigma_l, sigma_u=args.sigma_u, p=args.p,
        sigma_init=args.sigma_init, tau=args.tau, delta_bar=args.delta_bar, j_max=args.j_max,
        subsolver=args.subsolver, solver_seed=args.seed,
    )


def _problem(args):
    spec = builtin_problem(args.problem, n=args.n)
    if args.p > spec.oracle.p_max:
        raise ConfigurationError(f"p={args.p} exceeds the derivatives available for {args.problem}", field="p")
    x0 = args.x0 if getattr(args, "x0", None) else spec.default_start_points
    for x in x0:
        if x.shape != (spec.oracle.n,):
            raise ConfigurationError(f"start point {x.tolist()} does not have n={spec.oracle.n} entries", field="x0")
    return spec, x0


def _resolved(args, exclude=("command", "config", "threads")):
    out = {}
    for k, v in sorted(vars(args).items()):
        if k in exclude:
            continue
        if k == "x0" and v is not None:
            v = [x.tolist() for x in v]
        out[k] = v
    return out


def _write(path, text):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def cmd_run(args):
    formats = {f.strip() for f in args.formats.split(",") if f.strip()}
    if not formats <= {"json", "csv"} or not formats:
        raise ConfigurationError("formats must be json, csv or json,csv", field="formats")
    spec, x0 = _problem(args)
    config = RunConfig(
        algorithm=args.algo, eps=args.eps, rsparams=_rsparams(args), lhop_selection=args.lhop_selection,
        seed=args.seed, k_max=args.k_max, alpha=args.alpha, threads=args.threads,
    )
    trace = run(spec.oracle, x0, config)
    out = Path(args.out)
    if "json" in formats:
        _write(out / "front.json", trace.front.to_json())
    if "csv" in formats:
        _write(out / "front.csv", trace.front.to_csv())
    _write(out / "trace.csv", trace.to_csv())
    _write(out / "trials.csv", trials_to_csv(trace.trial_log, spec.oracle.m))
    if trace.failed_trials:
        _write(out / "trials_failed.csv", trials_to_csv(trace.failed_trials, spec.oracle.m))
    report = bounds_for_trace(spec.oracle, trace, config.rsparams)
    if report.available:
        _write(out / "bounds.json", dumps(report.to_dict()))
    counts = empirical_counts(trace)
    manifest = {
        "version": __version__,
        "config": _resolved(args),
        "termination": trace.termination,
        "error": trace.error,
        "iterations": trace.iterations,
        "front_size": len(trace.front),
        "reference_point": trace.reference_point.tolist(),
        "final_hypervolume": trace.records[-1].hypervolume,
        "points_outside_reference_box": trace.records[-1].n_outside,
        "empirical_counts": vars(counts),
    }
    _write(out / "manifest.json", dumps(manifest))
    log.info("%s: %s after %d iterations, %d front points", args.algo, trace.termination,
             trace.iterations, len(trace.front))
    if trace.termination == "search_error":
        log.error("search failed: %s", trace.error)
        return EXIT_SEARCH
    return EXIT_KMAX if trace.termination == "k_max" else EXIT_OK


def cmd_bounds(args):
    spec, x0 = _problem(args)
    oracle = spec.oracle
    params = _rsparams(args)
    L = args.L if args.L is not None else oracle.lipschitz_constants(args.p)
    if L is None:
        raise ConfigurationError(f"Lipschitz constants of order {args.p} unknown for {args.problem}; pass --L", field="L")
    L = np.broadcast_to(np.asarray(L, dtype=float), (oracle.m,))
    F0 = np.array([oracle.eval(x) for x in x0])
    rho = F0.max(axis=0) + args.alpha
    front = nondominated_filter([EvaluatedPoint(x, f) for x, f in zip(x0, F0)])
    HI_0 = reporting_hypervolume(front, rho)[0]
    HI_bar = f0_gap = None
    if oracle.f_min is not None:
        # Any attainable front lies above f_min, so this box bounds every hypervolume.
        HI_bar = float(np.prod(rho - oracle.f_min))
        f0_gap = float(max(np.min(f - oracle.f_min) for f in front.objectives))
    report = compute_bounds(params, L, args.eps, HI_bar=HI_bar, HI_0=HI_0, f0_gap=f0_gap, X_eps_size=1, m=oracle.m)
    _write(Path(args.out) / "bounds.json", dumps(report.to_dict()))
    return EXIT_OK


def _load_front(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise InputError(f"cannot read front file: {exc}") from None
    return Front.from_json(text) if path.suffix == ".json" else Front.from_csv(text)


def cmd_verify_front(args):
    spec = builtin_problem(args.problem, n=args.n)
    oracle = spec.oracle
    front = _load_front(args.front)
    for i, pt in enumerate(front):
        if pt.x.shape != (oracle.n,) or pt.fx.shape != (oracle.m,):
            raise InputError(f"point {i} does not match n={oracle.n}, m={oracle.m}")
    stat = certify_eps_stationary(oracle, front, args.eps)
    F = front.objectives
    dominated = sorted({j for i in range(len(F)) for j in range(len(F)) if i != j and dominates(F[i], F[j])})
    report = {
        "eps": args.eps,
        "n_points": len(front),
        "max_stationarity": stat.max,
        "stationarity": stat.measures.tolist(),
        "nonstationary_indices": stat.failing,
        "dominated_indices": dominated,
        "passed": stat.passed and not dominated,
    }
    target = Path(args.report) if args.report else Path(args.front).with_name("verify_report.json")
    _write(target, dumps(report))
    for i in stat.failing:
        log.error("point %d is not eps-stationary: ||v|| = %.17g", i, stat.measures[i])
    for i in dominated:
        log.error("point %d is dominated", i)
    return EXIT_OK if report["passed"] else EXIT_VERIFY


COMMANDS = {"run": cmd_run, "bounds": cmd_bounds, "verify-front": cmd_verify_front}


def main(argv=None):
    logging.basicConfig(level=logging.INFO, format="%(levelname)s: %(message)s")
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parse_args(argv)
        return COMMANDS[args.command](args)
    except (ConfigurationError, InputError) as exc:
        field = getattr(exc, "field", None)
        log.error("invalid configuration%s: %s", f" ({field})" if field else "", exc)
        return EXIT_CONFIG
    except ParetoHopError as exc:
        log.error("%s", exc)
        return EXIT_SEARCH


if __name__ == "__main__":
    sys.exit(main())
