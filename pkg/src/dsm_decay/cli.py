"""Command-line entry point: ``dsm-decay {certify,simulate,schedule,dsm}``.

Exit codes: 0 pass, 1 certificate/bound failure, 2 usage or malformed
input, 3 blow-up, 4 solver failure. Every invocation writes a JSON manifest
next to its primary output.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .certificates import (
    Certificate,
    ContinuousInequality,
    DiscreteCertificate,
    DiscreteInequality,
    check_continuous,
    check_discrete,
    check_initial,
    check_split,
    default_grid,
    default_tolerance,
)
from .coefficients import coefficient_from_dict
from .dsm import DsmConfig, auto_schedule, check_dsm_bound, solve_dsm
from .errors import BlowUp, DecayError, ExponentOutOfRange, NoConvergence, SolveFailure, StepUnderflow
from .oracles import (
    generate_certified_instance,
    integrate_extremal,
    iterate_discrete,
    verify_trajectory_bound,
)
from .problems import ProblemSpec
from .schedule import build_schedule, verify_schedule

EXIT_PASS, EXIT_FAIL, EXIT_USAGE, EXIT_BLOWUP, EXIT_SOLVER = 0, 1, 2, 3, 4
SWEEP_PS = (1.25, 1.5, 2.0, 3.0)


class UsageError(Exception):
    pass


def _load_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise UsageError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"malformed JSON in {path}: {exc}") from None


def _sequence(obj, length):
    if isinstance(obj, (int, float)):
        return np.full(length, float(obj))
    if isinstance(obj, list):
        return np.asarray(obj, dtype=float)
    if isinstance(obj, dict):
        kind = obj.get("kind")
        if kind == "constant":
            return np.full(length, float(obj["value"]))
        if kind == "geometric":
            return float(obj.get("start", 1.0)) * float(obj["ratio"]) ** np.arange(length)
    raise UsageError(f"cannot parse sequence {obj!r}")


def parse_continuous(cfg):
    """``{t0, p, gamma, alpha, beta, mu, g0?, theta?, t_end?}`` -> (ineq, cert)."""
    try:
        ineq = ContinuousInequality(
            t0=float(cfg.get("t0", 0.0)),
            p=float(cfg["p"]),
            gamma=coefficient_from_dict(cfg["gamma"]),
            alpha=coefficient_from_dict(cfg["alpha"]),
            beta=coefficient_from_dict(cfg["beta"]),
        )
        cert = Certificate(coefficient_from_dict(cfg["mu"])) if "mu" in cfg else None
    except KeyError as exc:
        raise UsageError(f"config is missing key {exc}") from None
    except DecayError as exc:
        raise UsageError(str(exc)) from None
    return ineq, cert


def parse_discrete(cfg):
    """``{p, N, gamma, alpha, beta, h?, mu?, g0?, theta?}``; sequences have N + 1 entries."""
    try:
        N = int(cfg["N"]) if "N" in cfg else len(cfg["gamma"]) - 1
        length = N + 1
        dineq = DiscreteInequality(
            p=float(cfg["p"]),
            gamma=_sequence(cfg["gamma"], length),
            alpha=_sequence(cfg["alpha"], length),
            beta=_sequence(cfg["beta"], length),
            h=_sequence(cfg["h"], length) if "h" in cfg else None,
        )
        dcert = DiscreteCertificate(_sequence(cfg["mu"], length)) if "mu" in cfg else None
    except (KeyError, TypeError) as exc:
        raise UsageError(f"config is missing or has a bad key: {exc}") from None
    except DecayError as exc:
        raise UsageError(str(exc)) from None
    return dineq, dcert, N


class Run:
    """Collects outputs and writes the manifest once at the end."""

    def __init__(self, command, argv, out):
        self.command = command
        self.argv = list(argv)
        self.out = Path(out)
        self.out.parent.mkdir(parents=True, exist_ok=True)
        self.outputs = []
        self.seed = None
        self.extra = {}
        self.start = time.perf_counter()

    def output(self, path):
        self.outputs.append(str(path))
        return path

    def finish(self, exit_code):
        manifest = {
            "command": self.command,
            "argv": self.argv,
            "seed": self.seed,
            "version": __version__,
            "outputs": self.outputs,
            "exit_code": exit_code,
            "duration_s": time.perf_counter() - self.start,
        }
        manifest.update(self.extra)
        path = self.out.with_name(self.out.name + ".manifest.json")
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(manifest, fh, indent=2, default=str)
            fh.write("\n")
        return exit_code


def _emit(obj):
    print(json.dumps(obj, indent=2, default=float))


def cmd_certify(args, run: Run) -> int:
    cfg = _load_json(args.config)
    if args.mode == "discrete":
        dineq, dcert, _ = parse_discrete(cfg)
        if dcert is None:
            raise UsageError("discrete config needs 'mu'")
        tol = 1e-12 if args.tol is None else args.tol
        report = check_discrete(dineq, dcert, float(cfg.get("g0", 0.0)), cfg.get("theta"), tol)
    else:
        ineq, cert = parse_continuous(cfg)
        if cert is None:
            raise UsageError("continuous config needs 'mu'")
        t_end = float(cfg.get("t_end", ineq.t0 + 10.0))
        grid = default_grid(ineq.t0, t_end, args.grid_points)
        tol = default_tolerance(ineq, cert) if args.tol is None else args.tol
        if args.mode == "split":
            if "theta" not in cfg:
                raise UsageError("split mode needs 'theta' in the config")
            report = check_split(ineq, cert, float(cfg["theta"]), grid, tol)
        else:
            report = check_continuous(ineq, cert, grid, tol)
        if "g0" in cfg:
            strict = bool(cfg.get("strict", True))
            report.extras["initial_pass"] = check_initial(cert, float(cfg["g0"]), strict, ineq.t0)
            report.passed = report.passed and report.extras["initial_pass"]
    report.to_csv(run.output(run.out))
    _emit({"pass": report.passed, "worst_slack": report.worst_slack, "worst_location": report.worst_location})
    return EXIT_PASS if report.passed else EXIT_FAIL


def _parse_seeds(text):
    if ".." in text:
        lo, hi = text.split("..", 1)
        return list(range(int(lo), int(hi) + 1))
    return [int(s) for s in text.split(",") if s]


def _threads():
    try:
        return max(1, int(os.environ.get("DSM_DECAY_THREADS", "1")))
    except ValueError:
        return 1


def _sweep_one(seed, p, margin, span, rel_tol, abs_tol):
    ineq, cert, g0 = generate_certified_instance(seed, p, margin)
    traj = integrate_extremal(ineq, g0, ineq.t0 + span, rel_tol, abs_tol)
    report = verify_trajectory_bound(traj, cert, strict=True)
    return seed, p, report.extras["max_product"], report.passed


def cmd_simulate(args, run: Run) -> int:
    if args.seeds is not None:
        seeds = _parse_seeds(args.seeds)
        run.seed = seeds
        jobs = [(s, args.p if args.p else SWEEP_PS[i % len(SWEEP_PS)]) for i, s in enumerate(seeds)]
        span = args.t_end if args.t_end is not None else 50.0
        with ThreadPoolExecutor(max_workers=_threads()) as pool:
            results = list(pool.map(lambda job: _sweep_one(job[0], job[1], args.margin, span, args.rel_tol, args.abs_tol), jobs))
        results.sort(key=lambda r: r[0])
        lines = ["seed,p,max_product,pass"] + [f"{s},{p:.17g},{m:.17g},{int(ok)}" for s, p, m, ok in results]
        with open(run.output(run.out), "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
        passed = sum(ok for *_, ok in results)
        _emit({"instances": len(results), "passed": passed})
        return EXIT_PASS if passed == len(results) else EXIT_FAIL

    if args.config is None:
        raise UsageError("simulate needs --config or --seeds")
    cfg = _load_json(args.config)
    g0 = float(cfg.get("g0", 0.0))
    report_path = run.out.with_name(run.out.stem + "_bound.csv")
    if args.mode == "recursion":
        dineq, dcert, N = parse_discrete(cfg)
        steps = args.steps if args.steps is not None else N
        traj = iterate_discrete(dineq, g0, steps)
        traj.to_csv(run.output(run.out))
        cert = dcert
    else:
        ineq, cert = parse_continuous(cfg)
        t_end = args.t_end if args.t_end is not None else float(cfg.get("t_end", ineq.t0 + 10.0))
        try:
            traj = integrate_extremal(ineq, g0, t_end, args.rel_tol, args.abs_tol)
        except BlowUp as exc:
            exc.trajectory.to_csv(run.output(run.out))
            run.extra["escape_time"] = exc.escape_time
            _emit({"status": "blowup", "escape_time": exc.escape_time})
            return EXIT_BLOWUP
        traj.to_csv(run.output(run.out))
    if cert is None:
        _emit({"status": "ok", "bound_checked": False})
        return EXIT_PASS
    tol = (0.0 if args.strict else 1e-6) if args.tol is None else args.tol
    report = verify_trajectory_bound(traj, cert, strict=args.strict, tol=tol)
    report.to_csv(run.output(report_path))
    _emit({"status": "ok", "pass": report.passed, "max_product": report.extras["max_product"]})
    return EXIT_PASS if report.passed else EXIT_FAIL


def cmd_schedule(args, run: Run) -> int:
    mps = [float(x) for x in str(args.Mp).split(",")]
    results = []
    passed = True
    for mp in mps:
        params = build_schedule(mp, args.p, args.c1, args.g0)
        entry = params.to_dict()
        entry["M_p"] = mp
        entry["a0_over_lambda_below_g0_plus_1"] = entry["a0_over_lambda"] < args.g0 + 1
        if args.verify_grid:
            report = verify_schedule(params, mp, args.c1, args.g0, default_grid(0.0, args.t_end, args.verify_grid), args.tol)
            entry["verify_pass"] = report.passed
            entry["worst_slack"] = report.worst_slack
            passed = passed and report.passed
        results.append(entry)
    payload = results[0] if len(results) == 1 else results
    text = json.dumps(payload, indent=2)
    with open(run.output(run.out), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text + "\n")
    print(text)
    return EXIT_PASS if passed else EXIT_FAIL


def _problem_document(path):
    doc = _load_json(path)
    if "problem" not in doc:
        doc = {"problem": doc}
    try:
        spec = ProblemSpec.from_dict(doc["problem"])
        problem = spec.build()
    except (DecayError, TypeError, ValueError) as exc:
        raise UsageError(f"bad problem spec: {exc}") from None
    return doc, spec, problem


def cmd_dsm(args, run: Run) -> int:
    doc, spec, problem = _problem_document(args.problem)
    run.seed = spec.seed
    sched_cfg = dict(doc.get("schedule", {}))
    cfg = dict(doc.get("config", {}))
    if args.t_end is not None:
        cfg["t_end"] = args.t_end
    cfg["compute_V"] = bool(args.diagnostics)
    try:
        config = DsmConfig(**cfg)
        u0 = None if doc.get("u0") is None else np.asarray(doc["u0"], dtype=float).reshape(problem.dim)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad config: {exc}") from None
    try:
        params, info = auto_schedule(
            problem,
            u0,
            M_p=sched_cfg.get("Mp", "auto"),
            p=sched_cfg.get("p"),
            c1=sched_cfg.get("c1", "auto"),
            g0=sched_cfg.get("g0", "auto"),
            newton_tol=config.newton_tol,
            max_iter=config.newton_max_iter,
            seed=spec.seed,
        )
        u, trace = solve_dsm(problem, params, config, u0)
    except ExponentOutOfRange as exc:
        raise UsageError(str(exc)) from None
    except (SolveFailure, NoConvergence, StepUnderflow) as exc:
        _emit({"status": "solver_failure", "error": type(exc).__name__, "message": str(exc)})
        return EXIT_SOLVER
    trace.to_csv(run.output(run.out))
    a_end = float(params.schedule.a(config.t_end))
    residual = float(np.linalg.norm(problem.residual(u, a_end)))
    summary = {"residual": residual, "schedule": params.to_dict(), "schedule_inputs": info}
    ok = residual < 1e-6 * (1.0 + float(np.linalg.norm(problem.f)))
    summary["residual_pass"] = ok
    if problem.known_y is not None:
        summary["err_y"] = float(np.linalg.norm(u - problem.known_y))
    if args.diagnostics:
        report = check_dsm_bound(trace, params)
        summary["bound_pass"] = report.passed
        summary["bound_worst_slack"] = report.worst_slack
        summary.update({k: v for k, v in report.extras.items() if k != "bound_pass"})
        ok = ok and report.passed
    run.extra["summary"] = summary
    _emit(summary)
    return EXIT_PASS if ok else EXIT_FAIL


def build_parser():
    parser = argparse.ArgumentParser(prog="dsm-decay", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("certify", help="grid-check a decay certificate")
    p.add_argument("--mode", choices=["continuous", "split", "discrete"], default="continuous")
    p.add_argument("--config", required=True)
    p.add_argument("--grid-points", type=int, default=2048)
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--out", default="certify.csv")

    p = sub.add_parser("simulate", help="integrate/iterate the extremal case and check the bound")
    p.add_argument("--mode", choices=["ode", "recursion"], default="ode")
    p.add_argument("--config")
    p.add_argument("--seeds", help="certified-instance sweep, e.g. 0..99 or 1,5,7")
    p.add_argument("--p", type=float, default=None, help="exponent for --seeds (default cycles 1.25,1.5,2,3)")
    p.add_argument("--margin", type=float, default=0.9)
    p.add_argument("--t-end", type=float, default=None)
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--strict", action="store_true")
    p.add_argument("--tol", type=float, default=None, help="non-strict slack (default 1e-6)")
    p.add_argument("--rel-tol", type=float, default=1e-10)
    p.add_argument("--abs-tol", type=float, default=1e-14)
    p.add_argument("--out", default="simulate.csv")

    p = sub.add_parser("schedule", help="build (and verify) a regularisation schedule")
    p.add_argument("--Mp", required=True, help="value or comma-separated sweep")
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--c1", type=float, default=0.0)
    p.add_argument("--g0", type=float, default=0.0)
    p.add_argument("--verify-grid", type=int, default=0)
    p.add_argument("--t-end", type=float, default=1e3)
    p.add_argument("--tol", type=float, default=1e-12)
    p.add_argument("--out", default="schedule.json")

    p = sub.add_parser("dsm", help="run the regularised Newton flow on a library problem")
    p.add_argument("--problem", required=True, help="JSON document {problem, schedule, config, u0?}")
    p.add_argument("--t-end", type=float, default=None)
    p.add_argument("--diagnostics", action="store_true")
    p.add_argument("--out", default="dsm.csv")
    return parser


COMMANDS = {"certify": cmd_certify, "simulate": cmd_simulate, "schedule": cmd_schedule, "dsm": cmd_dsm}


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_PASS
    run = Run(args.command, argv, args.out)
    try:
        code = COMMANDS[args.command](args, run)
    except (UsageError, ExponentOutOfRange) as exc:
        print(f"error: {exc}", file=sys.stderr)
        code = EXIT_USAGE
    except (DecayError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        code = EXIT_USAGE
    return run.finish(code)


if __name__ == "__main__":
    sys.exit(main())
