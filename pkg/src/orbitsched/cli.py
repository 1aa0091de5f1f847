"""
Command-line entry point.

    orbitsched generate  --sats 2 --requests 200 --seed 42 --out data/
    orbitsched plan      --data data/ --planner ilp --out plan.json
    orbitsched benchmark --data data/ --planners greedy,ilp --out bench/
    orbitsched train     --algo alphazero --out agent.ckpt --curve curve.csv

Exit codes: 0 success, 2 usage or input error, 3 a planner produced a plan
that fails validation.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from typing import List, Optional, Sequence

from . import __version__
from .chaining import gantt_csv
from .clustering import CLUSTER_METHODS
from .core import DataError, ParseError, ProblemInstance, load_instance, write_instance, write_plan
from .generator import DEFAULT_PRIORITY_MIX, generate_instance
from .pipeline import PLANNERS, PlannerOptions, RunResult, run, stats_rows

EXIT_OK, EXIT_USAGE, EXIT_INVALID = 0, 2, 3
LOG_ENV = "ORBIT_SCHED_LOG"
LOG_LEVELS = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}

log = logging.getLogger("orbitsched")


class UsageError(Exception):
    pass


# -- argument types ----------------------------------------------------------------------

def _int_at_least(lo):
    def parse(text):
        try:
            v = int(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
        if v < lo:
            raise argparse.ArgumentTypeError(f"must be >= {lo}, got {v}")
        return v
    return parse


def _positive_float(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}")
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be > 0, got {v}")
    return v


def _planner_list(text):
    names = [t.strip() for t in text.split(",") if t.strip()]
    if not names:
        raise argparse.ArgumentTypeError("the planner list is empty")
    bad = [n for n in names if n not in PLANNERS]
    if bad:
        raise argparse.ArgumentTypeError(f"unknown planner(s) {', '.join(bad)}; choose from {', '.join(PLANNERS)}")
    return names


def _mix(text):
    try:
        vals = [float(t) for t in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected four comma-separated numbers, got {text!r}")
    if len(vals) != 4 or any(v < 0 for v in vals) or sum(vals) <= 0:
        raise argparse.ArgumentTypeError("priority mix needs four non-negative weights")
    return tuple(vals)


# -- parser ------------------------------------------------------------------------------

def _instance_flags(p):
    g = p.add_argument_group("instance")
    g.add_argument("--data", help="directory with ephemeris.json and requests.json")
    g.add_argument("--sats", type=_int_at_least(1), default=2, help="satellites to generate (default 2)")
    g.add_argument("--requests", type=_int_at_least(1), default=200, help="requests to generate (default 200)")
    g.add_argument("--seed", type=_int_at_least(0), default=0)
    g.add_argument("--hotspot-size", type=_int_at_least(1), default=8,
                   help="requests per generated target cluster (default 8)")
    g.add_argument("--duration-s", type=_int_at_least(1200), default=86400)
    g.add_argument("--priority-mix", type=_mix, default=DEFAULT_PRIORITY_MIX,
                   help="share of priorities 1..4, e.g. 0.1,0.2,0.3,0.4")


def _planner_flags(p):
    g = p.add_argument_group("planner")
    g.add_argument("--cluster", choices=CLUSTER_METHODS, help="clustering (planner default if omitted)")
    g.add_argument("--k", type=_int_at_least(1), help="k-means cluster count per satellite")
    g.add_argument("--step-s", type=_int_at_least(1), default=5, help="candidate start spacing (s)")
    g.add_argument("--time-limit", type=_positive_float, default=10.0, help="per-cluster solver limit (s)")
    g.add_argument("--oracle", action="store_true", help="solve clusters by exhaustive enumeration")
    g.add_argument("--checkpoint", help="trained network for ppo/alphazero")
    g.add_argument("--simulations", type=_int_at_least(0), help="tree-search simulations per move")
    g.add_argument("--jobs", type=_int_at_least(1), default=1, help="worker processes (one per satellite)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="orbitsched", description="Earth-observation mission planning")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file whose keys mirror the long flags")

    g = sub.add_parser("generate", parents=[common], help="write a synthetic instance")
    _instance_flags(g)
    g.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("plan", parents=[common], help="plan one instance")
    _instance_flags(p)
    _planner_flags(p)
    p.add_argument("--planner", choices=PLANNERS, default="greedy")
    p.add_argument("--out", default="plan.json", help="plan JSON path")
    p.add_argument("--gantt-csv", help="also write the Gantt rows as CSV")
    p.add_argument("--svg-map", help="map of completed (green) and missed (blue) requests")
    p.add_argument("--svg-gantt", help="Gantt chart of the plan")

    b = sub.add_parser("benchmark", parents=[common], help="compare planners on one instance")
    _instance_flags(b)
    _planner_flags(b)
    b.add_argument("--planners", type=_planner_list, default=["greedy", "ilp"],
                   help="comma-separated planner names")
    b.add_argument("--out", default="benchmark", help="output directory for benchmark.csv and timing.csv")

    t = sub.add_parser("train", parents=[common], help="train a reinforcement-learning agent")
    _instance_flags(t)
    t.add_argument("--algo", choices=("ppo", "alphazero"), default="alphazero")
    t.add_argument("--policy", choices=("classical", "hybrid"), help="policy head (default: ppo classical, "
                   "alphazero hybrid)")
    t.add_argument("--instances", type=_int_at_least(1), default=2,
                   help="training instances, generated with seeds seed+1 ..")
    t.add_argument("--steps", type=_int_at_least(1), default=20000, help="ppo environment steps")
    t.add_argument("--iterations", type=_int_at_least(1), default=5, help="alphazero outer iterations")
    t.add_argument("--episodes", type=_int_at_least(1), default=2, help="alphazero episodes per iteration")
    t.add_argument("--simulations", type=_int_at_least(1), default=16)
    t.add_argument("--out", required=True, help="checkpoint path")
    t.add_argument("--curve", help="learning curve CSV path")
    return parser


def _config_argv(parser: argparse.ArgumentParser, argv: List[str]) -> List[str]:
    """Expand ``--config FILE`` into flags placed before the command-line ones (which win)."""
    if "--config" not in argv and not any(a.startswith("--config=") for a in argv):
        return argv
    pre, _ = parser.parse_known_args(argv)
    path = getattr(pre, "config", None)
    if not path:
        return argv
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        parser.error(f"cannot read config {path}: {exc}")
    if not isinstance(cfg, dict):
        parser.error("config file must hold a JSON object")
    sub = parser._subparsers._group_actions[0].choices[pre.command]
    known = {opt.lstrip("-"): a for a in sub._actions for opt in a.option_strings if opt.startswith("--")}
    extra: List[str] = []
    for key, value in cfg.items():
        flag = key.replace("_", "-")
        if flag not in known or flag == "config":
            parser.error(f"unknown config key {key!r}")
        action = known[flag]
        if action.nargs == 0:
            if value:
                extra.append(f"--{flag}")
        elif isinstance(value, list):
            extra += [f"--{flag}", ",".join(str(v) for v in value)]
        else:
            extra += [f"--{flag}", str(value)]
    i = argv.index(pre.command)
    return argv[:i + 1] + extra + argv[i + 1:]


# -- commands ----------------------------------------------------------------------------

def _instance(args) -> ProblemInstance:
    if args.data:
        return load_instance(args.data)
    return generate_instance(args.sats, args.requests, args.priority_mix, args.seed,
                             duration_s=args.duration_s, hotspot_size=args.hotspot_size)


def _options(args) -> PlannerOptions:
    return PlannerOptions(cluster=args.cluster, k=args.k, step_s=args.step_s, time_limit_s=args.time_limit,
                          oracle=args.oracle, checkpoint=args.checkpoint, n_simulations=args.simulations,
                          seed=args.seed)


def _rate(rate) -> str:
    return "" if rate is None else f"{100.0 * rate:.2f}"


def format_report(result: RunResult) -> str:
    lines = [f"planner {result.planner}: {len(result.plan)} acquisitions, "
             f"{'valid' if result.valid else 'INVALID'}",
             f"{'priority':>8}  {'total':>6}  {'completed':>9}  {'rate %':>7}"]
    for p, total, done, rate in stats_rows(result.plan):
        lines.append(f"{p:>8}  {total:>6}  {done:>9}  {_rate(rate):>7}")
    return "\n".join(lines)


def cmd_generate(args) -> int:
    inst = generate_instance(args.sats, args.requests, args.priority_mix, args.seed,
                             duration_s=args.duration_s, hotspot_size=args.hotspot_size)
    ep, rp = write_instance(inst, args.out)
    print(f"wrote {ep} and {rp}")
    return EXIT_OK


def cmd_plan(args) -> int:
    from .svg import gantt_svg, map_svg, write_svg

    inst = _instance(args)
    result = run(args.planner, inst, _options(args), jobs=args.jobs)
    print(format_report(result))
    write_plan(result.plan, args.out)
    if args.gantt_csv:
        with open(args.gantt_csv, "w", encoding="utf-8") as fh:
            fh.write(gantt_csv(result.plan))
    if args.svg_map:
        write_svg(args.svg_map, map_svg(result.plan, inst))
    if args.svg_gantt:
        write_svg(args.svg_gantt, gantt_svg(result.plan))
    if not result.valid:
        for v in result.report.violations[:10]:
            print(f"violation: {v}", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK


BENCH_HEADER = ["planner", "p1", "p2", "p3", "p4", "valid"]


def benchmark_rows(results: Sequence[RunResult]) -> List[List[str]]:
    rows = []
    for r in results:
        rates = [_rate(rate) for _, _, _, rate in stats_rows(r.plan)]
        rows.append([r.planner] + rates + ["yes" if r.valid else "no"])
    return rows


def cmd_benchmark(args) -> int:
    inst = _instance(args)
    results = [run(name, inst, _options(args), jobs=args.jobs) for name in args.planners]
    rows = benchmark_rows(results)
    os.makedirs(args.out, exist_ok=True)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(BENCH_HEADER)
    w.writerows(rows)
    with open(os.path.join(args.out, "benchmark.csv"), "w", encoding="utf-8") as fh:
        fh.write(buf.getvalue())
    with open(os.path.join(args.out, "timing.csv"), "w", encoding="utf-8") as fh:
        fh.write("planner,wall_s\n" + "".join(f"{r.planner},{r.wall_s:.3f}\n" for r in results))
    widths = [10, 8, 8, 8, 8, 6]
    print("  ".join(h.rjust(wd) for h, wd in zip(BENCH_HEADER + ["wall_s"], widths + [8])))
    for row, r in zip(rows, results):
        print("  ".join(c.rjust(wd) for c, wd in zip(row + [f"{r.wall_s:.2f}"], widths + [8])))
    return EXIT_OK if all(r.valid for r in results) else EXIT_INVALID


def cmd_train(args) -> int:
    import torch

    from .rl.alphazero import AzConfig, train_alphazero
    from .rl.checkpoint import save_checkpoint, write_curve
    from .rl.envs import satellite_envs
    from .rl.ppo import PpoConfig, train_ppo

    torch.set_num_threads(1)
    envs = []
    for i in range(args.instances):
        inst = generate_instance(args.sats, args.requests, args.priority_mix, args.seed + 1 + i,
                                 duration_s=args.duration_s, hotspot_size=args.hotspot_size)
        envs += list(satellite_envs(inst, priority_order=True).values())
    if args.algo == "ppo":
        cfg = PpoConfig(total_steps=args.steps, policy=args.policy or "classical")
        net, curve = train_ppo(envs, cfg.policy, cfg, seed=args.seed)
    else:
        cfg = AzConfig(iterations=args.iterations, episodes_per_iter=args.episodes,
                       n_simulations=args.simulations, policy=args.policy or "hybrid")
        net, curve = train_alphazero(envs, cfg, seed=args.seed)
    save_checkpoint(args.out, net, {"algo": args.algo, "train": cfg.to_dict(), "seed": args.seed})
    if args.curve:
        write_curve(args.curve, curve)
    last = curve[-1][1] if curve else float("nan")
    print(f"trained {args.algo} ({cfg.policy}); final curve value {last:.4f}; checkpoint {args.out}")
    return EXIT_OK


COMMANDS = {"generate": cmd_generate, "plan": cmd_plan, "benchmark": cmd_benchmark, "train": cmd_train}


def _setup_logging() -> None:
    level = os.environ.get(LOG_ENV, "error").lower()
    if level not in LOG_LEVELS:
        raise UsageError(f"{LOG_ENV} must be one of {', '.join(LOG_LEVELS)}, got {level!r}")
    logging.basicConfig(level=LOG_LEVELS[level], format="%(levelname)s %(name)s: %(message)s",
                        stream=sys.stderr)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        _setup_logging()
    except UsageError as exc:
        print(f"orbitsched: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        args = parser.parse_args(_config_argv(parser, argv))
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        return COMMANDS[args.command](args)
    except (ParseError, DataError, ValueError, OSError) as exc:
        print(f"orbitsched: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
