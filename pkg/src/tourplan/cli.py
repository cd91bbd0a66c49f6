"""Command-line entry point: ``tourplan solve|bench|oracle|approx|gen``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from typing import Dict, List, Optional, Sequence

import numpy as np

from .core import CurveSpec, Instance, InstanceError, Problem
from .curves import CurveError, approximate, eval_curve, validate_pwl_error
from .instances import (GridSpec, PoiRecord, gen_grid, gen_random, ingest_poi_table, load_instance,
                        save_instance)
from .oracle import OracleError, OracleInfeasible, oracle_bmt, oracle_rmt
from .pipeline import PlanConfig, plan, prepare
from .solver import DEFAULT_THRESHOLDS, ModelError, SolveEvent
from .solver.export import ExportError, export_model

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_INFEASIBLE = 3
EXIT_NO_INCUMBENT = 4

log = logging.getLogger("tourplan")


class UsageError(Exception):
    pass


def _write(path: Optional[str], text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    with open(path, "w") as fh:
        fh.write(text)


def _with_problem(instance: Instance, args) -> Instance:
    mode = args.mode or instance.problem.mode
    if mode == "rmt":
        budget = args.budget if args.budget is not None else instance.problem.budget
        if budget is None:
            raise UsageError("rmt needs --budget (the instance has none)")
        return instance.with_problem(Problem.rmt(budget))
    requirement = args.requirement if args.requirement is not None else instance.problem.requirement
    if requirement is None:
        raise UsageError("bmt needs --requirement (the instance has none)")
    return instance.with_problem(Problem.bmt(requirement))


def _export_format(args, path: str) -> str:
    if args.export:
        return "mps_free" if args.export == "mps" else "lp_text"
    return "lp_text" if path.endswith(".lp") else "mps_free"


def _plan_config(args) -> PlanConfig:
    tours = "single"
    if args.tours > 1 or args.shared or args.disjoint:
        tours = "disjoint" if args.disjoint else "shared"
    return PlanConfig(epsilon=args.epsilon, flavor=args.flavor, gap=args.gap, time_limit=args.time_limit,
                      threads=args.threads, deterministic=args.deterministic, tours=tours, m=args.tours,
                      tour_limit=args.tour_limit, cyclic=not args.non_cyclic, heuristic=not args.no_heuristic)


def cmd_solve(args) -> int:
    instance = _with_problem(load_instance(args.instance), args)
    config = _plan_config(args)
    if args.export_only:
        _, _, model = prepare(instance, config)
        _write(args.export_only, export_model(model, _export_format(args, args.export_only)))
        log.info("wrote %s (%d variables, %d rows)", args.export_only, model.num_vars, model.num_rows)
        return EXIT_OK

    out = args.out
    if out:
        os.makedirs(out, exist_ok=True)
    events_fh = open(os.path.join(out, "events.jsonl"), "w") if out else None

    def sink(event: SolveEvent) -> None:
        if events_fh:
            events_fh.write(json.dumps(event.to_dict()) + "\n")
            events_fh.flush()
        if event.kind != "bound_improved":
            log.info("%8.2fs %-17s incumbent=%s bound=%s gap=%.4g", event.elapsed, event.kind,
                     event.incumbent, event.bound, event.gap)

    try:
        result = plan(instance, config, sink)
    finally:
        if events_fh:
            events_fh.close()
    if args.export and out:
        fmt = _export_format(args, "")
        ext = "mps" if fmt == "mps_free" else "lp"
        _write(os.path.join(out, f"model.{ext}"), export_model(result.model, fmt))

    mip = result.mip
    doc = {
        "status": mip.status,
        "stop_reason": mip.stop_reason,
        "mode": instance.problem.mode,
        "objective": mip.objective,
        "bound": mip.bound,
        "gap": mip.gap,
        "nodes": mip.nodes,
        "elapsed": mip.elapsed,
        "itineraries": [it.to_dict() for it in result.itineraries],
    }
    text = json.dumps(doc, indent=2) + "\n"
    _write(os.path.join(out, "itinerary.json") if out else None, text)
    if mip.status == "infeasible":
        print("error: the model is infeasible", file=sys.stderr)
        return EXIT_INFEASIBLE
    if mip.assignment is None:
        print(f"error: no feasible plan found ({mip.stop_reason})", file=sys.stderr)
        return EXIT_NO_INCUMBENT
    return EXIT_OK


def cmd_oracle(args) -> int:
    instance = _with_problem(load_instance(args.instance), args)
    cyclic = not args.non_cyclic
    fn = oracle_rmt if instance.problem.mode == "rmt" else oracle_bmt
    try:
        res = fn(instance, allocator=args.allocator, grid_step=args.grid_step, cyclic=cyclic)
    except OracleInfeasible as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    doc = {"mode": instance.problem.mode, "value": res.value,
           "itinerary": res.itinerary.to_dict() if res.itinerary else None}
    _write(args.out, json.dumps(doc, indent=2) + "\n")
    if args.out:
        print(res.value)
    return EXIT_OK


def parse_curve(text: str) -> CurveSpec:
    """``exp:RATE``, ``lin:RATE`` or ``sampled:t0,v0;t1,v1;...``."""
    kind, _, rest = text.partition(":")
    kind = kind.strip().lower()
    try:
        if kind in ("exp", "exponential"):
            return CurveSpec.exponential(float(rest))
        if kind in ("lin", "linear"):
            return CurveSpec.linear(float(rest))
        if kind == "sampled":
            pts = [tuple(float(x) for x in p.split(",")) for p in rest.split(";") if p.strip()]
            return CurveSpec.sampled(pts)
    except ValueError:
        pass
    raise UsageError(f"cannot parse curve {text!r}; use exp:RATE, lin:RATE or sampled:t,v;t,v")


def cmd_approx(args) -> int:
    spec = parse_curve(args.curve)
    eps = args.epsilon / 2 if args.half else args.epsilon
    pwl = approximate(spec, eps, flavor=args.flavor, method=args.method)
    err = validate_pwl_error(spec, pwl, args.grid_points)
    lines = [f"curve {args.curve} flavor {args.flavor} eps {eps:g}: {len(pwl.segments)} segments"]
    for seg in pwl.segments:
        lines.append(f"  [{seg.start:.6g}, {seg.end:.6g})  slope {seg.slope:.6g}  intercept {seg.intercept:.6g}")
    lines.append(f"max relative error {err:.6g} ({'ok' if err <= eps + 1e-9 or args.flavor == 'upper' else 'FAIL'})")
    print("\n".join(lines))
    if args.out:
        horizon = max(pwl.breakpoints[-1][0], 1e-9) * 1.5
        ts = np.linspace(0.0, horizon, args.samples)
        rows = ["t,f,f_approx"]
        rows += [f"{t:.9g},{eval_curve(spec, float(t)):.9g},{float(pwl(t)):.9g}" for t in ts]
        _write(args.out, "\n".join(rows) + "\n")
    return EXIT_OK


def _read_records(path: str) -> List[PoiRecord]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        try:
            return [PoiRecord(row["name"], int(row["rank"]), int(row["n_review"])) for row in reader]
        except (KeyError, ValueError) as exc:
            raise UsageError(f"{path}: expected columns name, rank, n_review ({exc})") from None


def cmd_gen(args) -> int:
    if args.kind == "grid":
        inst = gen_grid(GridSpec(args.rows, args.cols, args.seed), curve=args.curve, mode=args.mode)
    elif args.kind == "random":
        inst = gen_random(args.n, seed=args.seed, curve=args.curve, mode=args.mode, threshold=args.threshold)
    else:
        records = _read_records(args.table)
        dist = np.loadtxt(args.distances, delimiter=",", ndmin=2)
        inst = ingest_poi_table(records, dist, mode=args.mode, budget=args.budget,
                                requirement=args.requirement)
    if args.out:
        save_instance(inst, args.out)
        print(f"{args.out}: {inst.n} POIs, {len(inst.edges)} edges, bases {list(inst.bases)}")
    else:
        from .instances import write_instance

        sys.stdout.write(write_instance(inst) + "\n")
    return EXIT_OK


def time_to_thresholds(events: Sequence[SolveEvent], thresholds: Sequence[float]) -> Dict[float, Optional[float]]:
    """Elapsed time at which each gap threshold was first crossed (None if never)."""
    out: Dict[float, Optional[float]] = {th: None for th in thresholds}
    for ev in events:
        for th in thresholds:
            if out[th] is None and ev.incumbent is not None and ev.gap <= th + 1e-12:
                out[th] = ev.elapsed
    return out


def run_bench(sizes: Sequence[tuple], modes: Sequence[str], curves: Sequence[str], reps: int,
              time_limit: float, seed: int = 0, thresholds: Sequence[float] = DEFAULT_THRESHOLDS,
              epsilon: float = 0.05, instance_dir: Optional[str] = None) -> List[dict]:
    """One row per size x mode x curve, with mean time-to-threshold over reps that got there."""
    rows = []
    if instance_dir:
        os.makedirs(instance_dir, exist_ok=True)
    for rows_, cols in sizes:
        for mode in modes:
            for curve in curves:
                hits: Dict[float, List[float]] = {th: [] for th in thresholds}
                objectives, nodes = [], []
                for rep in range(reps):
                    inst = gen_grid(GridSpec(rows_, cols, seed + rep), curve=curve, mode=mode)
                    if instance_dir:
                        save_instance(inst, os.path.join(instance_dir, f"grid{rows_}x{cols}_{mode}_{curve}_{seed + rep}.json"))
                    res = plan(inst, PlanConfig(epsilon=epsilon, time_limit=time_limit, thresholds=thresholds))
                    for th, t in time_to_thresholds(res.mip.events, thresholds).items():
                        if t is not None:
                            hits[th].append(t)
                    objectives.append(res.mip.objective)
                    nodes.append(res.mip.nodes)
                row = {"size": f"{rows_}x{cols}", "problem": mode, "curve": curve, "reps": reps}
                for th in thresholds:
                    times = hits[th]
                    row[f"{th:.0%}"] = (f"{np.mean(times):.2f}" if times else "-") + f" ({len(times)})"
                row["objectives"] = " ".join("-" if o is None else f"{o:.9g}" for o in objectives)
                row["nodes"] = " ".join(str(n) for n in nodes)
                rows.append(row)
                log.info("bench %s %s %s done", row["size"], mode, curve)
    return rows


def _parse_size(text: str) -> tuple:
    try:
        r, c = text.lower().split("x")
        return int(r), int(c)
    except ValueError:
        raise argparse.ArgumentTypeError(f"size must look like 4x5, got {text!r}") from None


def cmd_bench(args) -> int:
    thresholds = tuple(sorted(set(args.thresholds), reverse=True))
    inst_dir = os.path.join(args.out, "instances") if args.out else None
    rows = run_bench(args.sizes, args.modes, args.curves, args.reps, args.time_limit, args.seed,
                     thresholds, args.epsilon, inst_dir)
    fields = list(rows[0].keys()) if rows else []
    lines = [",".join(fields)] + [",".join(str(r[f]) for f in fields) for r in rows]
    text = "\n".join(lines) + "\n"
    print(text, end="")
    if args.out:
        _write(os.path.join(args.out, "bench.csv"), text)
    return EXIT_OK


def _problem_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--instance", required=True, help="instance JSON document")
    p.add_argument("--mode", choices=("rmt", "bmt"), help="override the instance's problem mode")
    p.add_argument("--budget", type=float, help="time budget for rmt")
    p.add_argument("--requirement", type=float, help="reward requirement for bmt")
    p.add_argument("--non-cyclic", action="store_true", help="allow ending at a different base")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tourplan", description="Reward-optimal tours over POIs with learning curves.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", parents=[common], help="build and solve the tour model")
    _problem_flags(p)
    p.add_argument("--epsilon", type=float, default=0.05)
    p.add_argument("--flavor", choices=("band", "upper"), help="override the curve approximation flavor")
    p.add_argument("--gap", type=float, default=0.0, help="stop once the relative gap is at most this")
    p.add_argument("--time-limit", type=float, default=600.0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--deterministic", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--seed", type=int, default=0, help="accepted for symmetry; the solver is seedless")
    p.add_argument("--export", choices=("mps", "lp"), help="also write the model (into --out)")
    p.add_argument("--export-only", metavar="PATH", help="write the model to PATH and stop")
    p.add_argument("--tours", type=int, default=1, metavar="M")
    group = p.add_mutually_exclusive_group()
    group.add_argument("--shared", action="store_true", help="M tours may share a base")
    group.add_argument("--disjoint", action="store_true", help="M tours from distinct bases")
    p.add_argument("--tour-limit", type=float, help="per-tour time cap for multiple tours")
    p.add_argument("--no-heuristic", action="store_true", help="skip the greedy start")
    p.add_argument("--out", help="directory for itinerary.json, events.jsonl and exports")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("oracle", parents=[common], help="brute-force optimum of a small instance")
    _problem_flags(p)
    p.add_argument("--allocator", choices=("auto", "greedy", "dp"), default="auto")
    p.add_argument("--grid-step", type=float, default=1e-3)
    p.add_argument("--out", help="write the result document here")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("approx", parents=[common], help="piecewise-linear approximation of a curve")
    p.add_argument("--curve", required=True, help="exp:RATE, lin:RATE or sampled:t,v;t,v;...")
    p.add_argument("--epsilon", type=float, default=0.05)
    p.add_argument("--half", action="store_true", help="use epsilon/2, as the rmt model does")
    p.add_argument("--flavor", choices=("band", "upper"), default="band")
    p.add_argument("--method", choices=("greedy", "construct"), default="greedy")
    p.add_argument("--grid-points", type=int, default=10_000)
    p.add_argument("--samples", type=int, default=400)
    p.add_argument("--out", help="CSV of (t, f, f_approx) samples")
    p.set_defaults(func=cmd_approx)

    p = sub.add_parser("gen", parents=[common], help="generate or ingest an instance")
    p.add_argument("kind", choices=("grid", "random", "ingest"))
    p.add_argument("--rows", type=int, default=4)
    p.add_argument("--cols", type=int, default=5)
    p.add_argument("--n", type=int, default=8)
    p.add_argument("--threshold", type=float, help="edge distance threshold for random instances")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--curve", choices=("linear", "exponential"), default="linear")
    p.add_argument("--mode", choices=("rmt", "bmt"), default="rmt")
    p.add_argument("--table", help="ingest: CSV with name, rank, n_review")
    p.add_argument("--distances", help="ingest: CSV travel-time matrix in rank order")
    p.add_argument("--budget", type=float, default=480.0)
    p.add_argument("--requirement", type=float)
    p.add_argument("--out", help="output instance file (stdout if omitted)")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("bench", parents=[common], help="time-to-gap table over generated grids")
    p.add_argument("--sizes", type=_parse_size, nargs="+", default=[(2, 3)])
    p.add_argument("--modes", nargs="+", choices=("rmt", "bmt"), default=["rmt", "bmt"])
    p.add_argument("--curves", nargs="+", choices=("linear", "exponential"), default=["linear", "exponential"])
    p.add_argument("--reps", type=int, default=3)
    p.add_argument("--time-limit", type=float, default=60.0)
    p.add_argument("--thresholds", type=float, nargs="+", default=list(DEFAULT_THRESHOLDS))
    p.add_argument("--epsilon", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="directory for bench.csv and the generated instances")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(message)s", stream=sys.stderr)
    if args.command == "gen" and args.kind == "ingest" and not (args.table and args.distances):
        parser.error("gen ingest needs --table and --distances")
    try:
        return args.func(args)
    except (UsageError, InstanceError, ModelError, CurveError, OracleError, ExportError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
