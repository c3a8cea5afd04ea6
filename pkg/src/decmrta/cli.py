"""Command-line entry point.

Exit codes: 0 success (or feasible plan), 1 usage error, 2 domain error
(infeasible plan, oversized exact solve, invalid scenario).
"""

from __future__ import annotations

import argparse
import csv
import io
import statistics
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

from . import ilp
from .domain import GeneratorSpec, ScenarioError, generate_scenario, load_scenario
from .sim import POLICIES, SimConfig, run_mission, sweep_latency, sweep_swarm_size

USAGE, DOMAIN = 1, 2

CSV_COLUMNS = (
    "scenario",
    "policy",
    "m",
    "L",
    "seed",
    "completion_rate",
    "tasks_completed",
    "tasks_expired",
    "unattempted",
    "wasted_trips",
    "decisions",
    "cumulative_compute_s",
    "mean_robot_compute_s",
    "total_distance",
)


class UsageError(Exception):
    pass


class DomainError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(USAGE, f"{self.prog}: error: {message}\n")


def _int_list(text: str) -> list[int]:
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    return values


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _read_scenario(path: str):
    try:
        return load_scenario(Path(path).read_text())
    except OSError as exc:
        raise UsageError(f"cannot read scenario: {exc}") from None
    except ScenarioError as exc:
        raise DomainError(f"invalid scenario {path}: {exc}") from None


TIMING_COLUMNS = ("cumulative_compute_s", "mean_robot_compute_s")


def _write_csv(rows: list[dict], out: Optional[str], timing: bool = True) -> None:
    # wall-clock columns are the only non-reproducible output; --no-timing drops them
    columns = [c for c in CSV_COLUMNS if timing or c not in TIMING_COLUMNS]
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=columns, extrasaction="ignore", lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: _fmt(v) for k, v in row.items()})
    if out:
        Path(out).write_text(buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())


def _fmt(v):
    return f"{v:.6g}" if isinstance(v, float) else v


def _say(args, text: str) -> None:
    # keep stdout clean for CSV when no output file was given
    print(text, file=sys.stdout if args.out else sys.stderr)


def cmd_generate(args) -> int:
    spec = GeneratorSpec(
        n=args.tasks,
        m=args.robots,
        area=args.area,
        deadline_range=(args.deadline_min, args.deadline_max),
        dynamic_fraction=args.dynamic_fraction,
        arrival_window=(0.0, args.arrival_max),
        speed=args.speed,
        max_range=args.range,
        payload_capacity=args.payload,
        max_tours=args.tours,
        alpha=args.alpha,
        epsilon=args.epsilon,
        service_time=args.service_time,
    )
    try:
        scenario = generate_scenario(spec, args.seed)
    except ScenarioError as exc:
        raise DomainError(str(exc)) from None
    text = scenario.dumps()
    if args.out:
        Path(args.out).write_text(text)
        print(f"wrote {args.out}: n={scenario.n} m={scenario.num_robots} hash={scenario.digest()}")
    else:
        sys.stdout.write(text)
    return 0


def _sim_row(scenario, cfg: SimConfig) -> dict:
    log, met = run_mission(scenario, cfg)
    row = {"scenario": scenario.digest(), "policy": cfg.policy, "m": scenario.num_robots, "L": cfg.latency, "seed": cfg.seed}
    row.update(met.row())
    return row


def cmd_run(args) -> int:
    scenario = _read_scenario(args.scenario)
    cfg = SimConfig(policy=args.policy, decision_lead=args.lead, latency=args.latency, seed=args.seed)
    log, met = run_mission(scenario, cfg)
    if args.log:
        Path(args.log).write_text(log.dumps(timing=not args.no_timing))
    row = {"scenario": scenario.digest(), "policy": cfg.policy, "m": scenario.num_robots, "L": cfg.latency, "seed": cfg.seed}
    row.update(met.row())
    _write_csv([row], args.out, not args.no_timing)
    _say(
        args,
        f"{cfg.policy}: completed {met.tasks_completed}/{scenario.n} "
        f"(rate {met.completion_rate:.3f}), wasted trips {met.wasted_trips}, "
        f"cumulative compute {met.cumulative_compute:.4f} s",
    )
    return 0


def _ilp_row(scenario, seed: int, timeout: float) -> dict:
    inst = ilp.build_instance(scenario)
    try:
        res = ilp.solve_exact(inst, timeout=timeout)
    except ilp.SearchTooLarge as exc:
        raise DomainError(
            f"{exc}; the exact solver is meant for desk-scale instances (n <= 12). "
            "Drop 'ilp' from --policies for larger scenarios."
        ) from None
    served = res.plan.served_count()
    n = scenario.n
    return {
        "scenario": scenario.digest(),
        "policy": "ilp" if res.optimal else "ilp-timeout",
        "m": scenario.num_robots,
        "L": 0.0,
        "seed": seed,
        "completion_rate": served / n if n else 1.0,
        "tasks_completed": served,
        "tasks_expired": n - served,
        "unattempted": 0,
        "wasted_trips": 0,
        "decisions": 1,
        "cumulative_compute_s": res.elapsed,
        "mean_robot_compute_s": res.elapsed / scenario.num_robots,
        "total_distance": "",
    }


def cmd_compare(args) -> int:
    scenario = _read_scenario(args.scenario)
    policies = [p.strip() for p in args.policies.split(",") if p.strip()]
    for p in policies:
        if p not in POLICIES + ("ilp",):
            raise UsageError(f"unknown policy {p!r}")
    if "ilp" in policies and scenario.n > args.ilp_max_tasks:
        raise DomainError(
            f"ILP requested on {scenario.n} tasks; exact search is limited to "
            f"{args.ilp_max_tasks}. Use a smaller scenario or drop 'ilp'."
        )
    rows = []
    for policy in policies:
        for rep in range(args.reps):
            seed = args.seed + rep
            if policy == "ilp":
                rows.append(_ilp_row(scenario, seed, args.ilp_timeout))
            else:
                rows.append(_sim_row(scenario, SimConfig(policy=policy, latency=args.latency, seed=seed)))
    _write_csv(rows, args.out, not args.no_timing)
    for policy in policies:
        mine = [r for r in rows if r["policy"].startswith(policy)]
        rate = statistics.fmean(r["completion_rate"] for r in mine)
        compute = statistics.fmean(r["cumulative_compute_s"] for r in mine)
        _say(args, f"{policy:9s} mean completion {rate:.3f}  mean cumulative compute {compute:.5f} s  ({len(mine)} reps)")
    return 0


def _sweep_cfg(args) -> SimConfig:
    return SimConfig(policy=args.policy, decision_lead=args.lead, latency=getattr(args, "latency", 0.0))


def cmd_sweep_size(args) -> int:
    if not args.sizes:
        raise UsageError("--sizes must list at least one swarm size")
    scenario = _read_scenario(args.scenario)
    seeds = range(args.seed, args.seed + args.reps)
    rows = sweep_swarm_size(scenario, args.sizes, _sweep_cfg(args), seeds)
    _write_csv(rows, args.out, not args.no_timing)
    for m in args.sizes:
        rate = statistics.fmean(r["completion_rate"] for r in rows if r["m"] == m)
        _say(args, f"m={m:4d} mean completion {rate:.3f}")
    return 0


def cmd_sweep_latency(args) -> int:
    if not args.sizes:
        raise UsageError("--sizes must list at least one swarm size")
    if not args.latencies:
        raise UsageError("--latencies must list at least one value")
    scenario = _read_scenario(args.scenario)
    seeds = range(args.seed, args.seed + args.reps)
    rows = sweep_latency(scenario, args.sizes, args.latencies, _sweep_cfg(args), seeds)
    _write_csv(rows, args.out, not args.no_timing)
    for m in args.sizes:
        parts = []
        for lat in args.latencies:
            cell = [r for r in rows if r["m"] == m and r["L"] == lat]
            parts.append(
                f"L={lat:g}: rate {statistics.fmean(r['completion_rate'] for r in cell):.3f} "
                f"wasted {statistics.fmean(r['wasted_trips'] for r in cell):.1f}"
            )
        _say(args, f"m={m:4d} " + "  ".join(parts))
    return 0


def cmd_solve(args) -> int:
    scenario = _read_scenario(args.scenario)
    inst = ilp.build_instance(scenario)
    try:
        res = ilp.solve_exact(inst, timeout=args.timeout, bound=args.bound)
    except ilp.SearchTooLarge as exc:
        raise DomainError(str(exc)) from None
    text = res.plan.dumps()
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    print(
        f"objective {res.objective:.6g} served {res.plan.served_count()}/{scenario.n} "
        f"optimal={res.optimal} time {res.elapsed:.3f} s nodes {res.nodes}",
        file=sys.stderr,
    )
    return 0


def cmd_verify(args) -> int:
    scenario = _read_scenario(args.scenario)
    try:
        plan = ilp.load_plan(Path(args.plan).read_text())
    except OSError as exc:
        raise UsageError(f"cannot read plan: {exc}") from None
    except ilp.PlanError as exc:
        raise DomainError(str(exc)) from None
    report = ilp.check_constraints(plan, ilp.build_instance(scenario))
    print(report)
    print(f"objective {ilp.objective_value(plan):.6g} served {plan.served_count()}/{scenario.n}")
    return 0 if report.feasible else DOMAIN


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", help="output file (default: stdout)")
    common.add_argument("--reps", type=int, default=1, help="repetitions (consecutive seeds)")
    common.add_argument("--no-timing", action="store_true", help="omit wall-clock columns for byte-stable CSV")

    parser = _Parser(prog="decmrta", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", parents=[common], help="write a random scenario file")
    g.add_argument("--tasks", type=int, required=True)
    g.add_argument("--robots", type=int, required=True)
    g.add_argument("--area", type=float, default=20.0, help="side of the square task area (km)")
    g.add_argument("--deadline-min", type=float, default=30.0)
    g.add_argument("--deadline-max", type=float, default=120.0)
    g.add_argument("--dynamic-fraction", type=float, default=0.0)
    g.add_argument("--arrival-max", type=float, default=60.0)
    g.add_argument("--speed", type=float, default=1.0, help="km/min")
    g.add_argument("--range", type=float, default=40.0, help="full-tank range (km)")
    g.add_argument("--payload", type=int, default=3, help="kits per tour")
    g.add_argument("--tours", type=int, default=2, help="tour limit for the exact solver")
    g.add_argument("--alpha", type=float, default=10.0)
    g.add_argument("--epsilon", type=float, default=None)
    g.add_argument("--service-time", type=float, default=0.0)
    g.set_defaults(func=cmd_generate)

    r = sub.add_parser("run", parents=[common], help="simulate one mission")
    r.add_argument("scenario")
    r.add_argument("--policy", choices=POLICIES, default="dec-mrta")
    r.add_argument("--latency", type=float, default=0.0)
    r.add_argument("--lead", type=float, default=1.0, help="decision lead time (min)")
    r.add_argument("--log", help="write the mission log here")
    r.set_defaults(func=cmd_run)

    c = sub.add_parser("compare", parents=[common], help="compare policies on one scenario")
    c.add_argument("scenario")
    c.add_argument("--policies", default="dec-mrta,rnd-feas", help="comma list of dec-mrta, rnd-feas, ilp")
    c.add_argument("--latency", type=float, default=0.0)
    c.add_argument("--ilp-timeout", type=float, default=300.0)
    c.add_argument("--ilp-max-tasks", type=int, default=12)
    c.set_defaults(func=cmd_compare)

    for name, func, doc in (
        ("sweep-size", cmd_sweep_size, "completion versus swarm size"),
        ("sweep-latency", cmd_sweep_latency, "completion versus swarm size and latency"),
    ):
        sp = sub.add_parser(name, parents=[common], help=doc)
        sp.add_argument("scenario")
        sp.add_argument("--sizes", type=_int_list, required=True, help="e.g. 1,2,5,10")
        sp.add_argument("--policy", choices=POLICIES, default="dec-mrta")
        sp.add_argument("--lead", type=float, default=1.0)
        if name == "sweep-latency":
            sp.add_argument("--latencies", type=_float_list, default=[0.0, 1.0])
        else:
            sp.add_argument("--latency", type=float, default=0.0)
        sp.set_defaults(func=func)

    s = sub.add_parser("solve", parents=[common], help="exact centralized plan for a small scenario")
    s.add_argument("scenario")
    s.add_argument("--timeout", type=float, default=300.0)
    s.add_argument("--bound", choices=("count", "slots"), default="count")
    s.set_defaults(func=cmd_solve)

    v = sub.add_parser("verify", help="check a route plan against every constraint family")
    v.add_argument("plan")
    v.add_argument("scenario")
    v.set_defaults(func=cmd_verify)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if getattr(args, "reps", 1) < 1:
            raise UsageError("--reps must be at least 1")
        return args.func(args)
    except UsageError as exc:
        print(f"decmrta: error: {exc}", file=sys.stderr)
        return USAGE
    except DomainError as exc:
        print(f"decmrta: {exc}", file=sys.stderr)
        return DOMAIN


if __name__ == "__main__":
    sys.exit(main())
