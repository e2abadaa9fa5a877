"""Command-line front end: ``ssinit run CONFIG ...`` and ``ssinit demo-config OUT``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .boundary import Mode, Scenario, simulation_inputs, warm_start_backward
from .eqsys import FULL, SIMPLIFIED, assemble_initialization_problem
from .errors import (ConfigError, ConvergenceError, EvaluationError, InitError,
                     StructuralSingularityError, VerificationError)
from .plant import DEMO_CONFIG, PlantGraph, flatten, load_plant
from .solver import (HomotopySchedule, SolverConfig, continuation, scaled_residual_norm,
                     verify_steady_state)
from .structure import blt_decompose

REPORT_SCHEMA = "ssinit-report/1"

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_STRUCTURAL = 3
EXIT_CONVERGENCE = 4
EXIT_VERIFICATION = 5

log = logging.getLogger("ssinit")


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, StructuralSingularityError):
        return EXIT_STRUCTURAL
    if isinstance(exc, VerificationError):
        return EXIT_VERIFICATION
    if isinstance(exc, (ConvergenceError, EvaluationError)):
        return EXIT_CONVERGENCE
    return EXIT_CONFIG


def apply_flags(g: PlantGraph, scenario=None, mode=None, load=None) -> PlantGraph:
    """Scenario, initialization mode of the paired blocks and off-design load."""
    g = g.with_scenario(scenario or g.scenario)
    if load is not None and mode is None:
        mode = "bwd"
    if mode is not None:
        mode = Mode.parse(mode)
        for b in g.inputs:
            if b.partner is not None:
                b.mode = mode
                g.output(b.partner).mode = mode
    if load is not None:
        if not load > 0:
            raise ConfigError("--load must be positive")
        for o in g.outputs:
            if o.mode is Mode.BWD:
                o.y_offdes = load * o.y_des
    return g


def read_warm_start(path) -> dict[str, float]:
    try:
        rep = json.loads(Path(path).read_text())
        return {row["name"]: float(row["value"]) for row in rep["solution"]}
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"cannot read warm-start report {path}: {exc!r}") from exc


def _blt_summary(ordering, problem) -> dict:
    names = [v.name for v in problem.unknowns]
    return {
        "components": len(ordering),
        "max_size": max(ordering.sizes, default=0),
        "histogram": {str(k): v for k, v in ordering.histogram().items()},
        "tearing": [[names[i] for i in c.tearing_variables] for c in ordering.components
                    if c.is_torn],
    }


def run_scenario(g: PlantGraph, *, warm_start: dict | None = None, lambda_step: float = 0.1,
                 tol: float = 1e-8, verify_horizon: float = 10.0, verify_tol: float = 1e-6):
    """Assemble, analyse, solve and verify; returns ``(report, timings)``.

    Raises the library errors; the caller maps them to exit codes.
    """
    timings = {}
    t0 = time.perf_counter()
    m = flatten(g)
    problem = assemble_initialization_problem(m)
    timings["assemble"] = time.perf_counter() - t0

    orphans = []
    if warm_start:
        orphans = warm_start_backward(warm_start, problem)

    t0 = time.perf_counter()
    config = SolverConfig(residual_tol=tol)
    ord0 = blt_decompose(problem, SIMPLIFIED, tearing=config.use_tearing)
    ord1 = blt_decompose(problem, FULL, tearing=config.use_tearing)
    timings["structure"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    sched = HomotopySchedule(initial_step=lambda_step, min_step=min(1e-4, lambda_step))
    trace = continuation(problem, sched, config)
    timings["continuation"] = time.perf_counter() - t0
    x = trace.solution
    sol = problem.full_solution(x)
    residual = scaled_residual_norm(problem, x, 1.0, trace.scalings[FULL])

    t0 = time.perf_counter()
    consts = simulation_inputs(g.inputs, sol, g.scenario, g.normalize)
    drift = verify_steady_state(m, sol, horizon=verify_horizon, constants=consts)
    timings["verify"] = time.perf_counter() - t0

    variables = m.variables
    report = {
        "schema": REPORT_SCHEMA,
        "plant": g.name,
        "scenario": g.scenario.value,
        "modes": {b.name: b.mode.value for b in (*g.inputs, *g.outputs)},
        "unknowns": problem.n,
        "equations": len(problem.equations),
        "blt": {"simplified": _blt_summary(ord0, problem), "full": _blt_summary(ord1, problem)},
        "trace": {
            "lambdas": trace.lambdas,
            "iterations": trace.iterations,
            "rejected": [[lam, msg] for lam, msg in trace.rejected],
            "newton_failures": trace.newton_failures,
            "stats": [s.as_dict() for s in trace.stats],
        },
        "residual_norm": residual,
        "verification": {"horizon": verify_horizon, "drift": drift, "tolerance": verify_tol},
        "warm_start_orphans": len(orphans),
        "outputs": {o.name: sol[o.names["y_in"]] for o in g.outputs},
        "inputs": {b.name: sol[b.names["u_out"]] for b in g.inputs},
        "solution": [{"name": n, "value": sol[n], "unit": variables[n].unit}
                     for n in variables if n in sol],
    }
    if drift > verify_tol:
        raise VerificationError(f"steady-state drift {drift:.3e} exceeds {verify_tol:g}",
                                report=report)
    return report, timings


def write_report(report: dict, timings: dict, path) -> None:
    path = Path(path)
    path.write_text(json.dumps(report, indent=1) + "\n")
    with open(path.with_suffix(".csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["variable", "value", "unit"])
        for row in report["solution"]:
            w.writerow([row["name"], repr(row["value"]), row["unit"]])
    # wall-clock numbers live apart so the report itself stays reproducible
    path.with_suffix(".timings.json").write_text(json.dumps(timings, indent=1) + "\n")


def _summary(report: dict) -> str:
    b0, b1 = report["blt"]["simplified"], report["blt"]["full"]
    return (f"{report['scenario']}: {report['unknowns']} unknowns, "
            f"BLT lambda=0 {b0['components']} blocks (max {b0['max_size']}), "
            f"lambda=1 {b1['components']} blocks (max {b1['max_size']}), "
            f"{len(report['trace']['lambdas'])} homotopy steps, "
            f"residual {report['residual_norm']:.2e}, drift {report['verification']['drift']:.2e}")


def _run_one(args_tuple):
    config, scenario, mode, load, warm, opts, report_path = args_tuple
    try:
        g = apply_flags(load_plant(config), scenario, mode, load)
        report, timings = run_scenario(g, warm_start=warm, **opts)
    except InitError as exc:
        partial = getattr(exc, "report", None)
        if partial is not None and report_path:
            write_report(partial, {}, report_path)
        return exit_code_for(exc), f"error: {exc}"
    if report_path:
        write_report(report, timings, report_path)
    return EXIT_OK, _summary(report)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ssinit", description="steady-state initialization of plant models")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="initialize a plant configuration")
    r.add_argument("config")
    r.add_argument("--scenario", choices=[s.cli_name for s in Scenario])
    r.add_argument("--mode", choices=["fwd", "bwd"], help="mode of the paired boundary blocks")
    r.add_argument("--load", type=float, help="off-design output target as a fraction of design")
    r.add_argument("--warm-start", help="report whose solution seeds the start values")
    r.add_argument("--lambda-step", type=float, default=0.1)
    r.add_argument("--tol", type=float, default=1e-8)
    r.add_argument("--report", help="JSON report path (CSV and timings written alongside)")
    r.add_argument("--verify-horizon", type=float, default=10.0)
    r.add_argument("--verify-tol", type=float, default=1e-6)
    r.add_argument("--sweep", action="store_true", help="run all six scenarios concurrently")
    r.add_argument("--jobs", type=int, default=None)
    d = sub.add_parser("demo-config", help="write the built-in demo plant configuration")
    d.add_argument("out")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if args.command == "demo-config":
        try:
            Path(args.out).write_text(DEMO_CONFIG.read_text())
        except OSError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        return EXIT_OK

    try:
        warm = read_warm_start(args.warm_start) if args.warm_start else None
        if not (args.lambda_step > 0 and args.lambda_step <= 1 and args.tol > 0
                and args.verify_horizon > 0):
            raise ConfigError("--lambda-step must lie in (0, 1]; --tol and --verify-horizon must be positive")
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    opts = {"lambda_step": args.lambda_step, "tol": args.tol,
            "verify_horizon": args.verify_horizon, "verify_tol": args.verify_tol}

    if args.sweep:
        stem = Path(args.report) if args.report else None
        jobs = []
        for s in Scenario:
            path = stem.with_name(f"{stem.stem}-{s.cli_name}{stem.suffix or '.json'}") if stem else None
            jobs.append((args.config, s.cli_name, args.mode, args.load, warm, opts, path))
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_run_one, jobs))
        code = EXIT_OK
        for (rc, msg) in results:
            print(msg, file=sys.stderr if rc else sys.stdout)
            code = max(code, rc)
        return code

    rc, msg = _run_one((args.config, args.scenario, args.mode, args.load, warm, opts, args.report))
    print(msg, file=sys.stderr if rc else sys.stdout)
    return rc


if __name__ == "__main__":
    sys.exit(main())
