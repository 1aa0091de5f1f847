"""
Planner registry and the cluster -> plan -> link -> validate pipeline.

Satellites never share requests, so a plan can be built satellite by
satellite. With ``jobs > 1`` the satellites are planned in worker processes
and the sequences are merged in satellite order, which gives the same plan
as a serial run.
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Optional

from .clustering import CLUSTER_METHODS
from .core import Plan, ProblemInstance, ValidationReport, make_plan, validate_plan
from .greedy import GreedyPlanner
from .ilp.planner import IlpPlanner
from .qubo import QuboPlanner

log = logging.getLogger(__name__)

PLANNERS = ("greedy", "ilp", "qubo", "ppo", "alphazero")
DEFAULT_CLUSTER = {"greedy": "kmeans", "ilp": "bunch-sort", "qubo": "bunch-sort",
                   "ppo": "none", "alphazero": "none"}
DEFAULT_SIMULATIONS = {"ppo": 0, "alphazero": 16}


@dataclass(frozen=True)
class PlannerOptions:
    cluster: Optional[str] = None
    k: Optional[int] = None
    step_s: int = 5
    time_limit_s: Optional[float] = 10.0
    oracle: bool = False
    checkpoint: Optional[str] = None
    n_simulations: Optional[int] = None
    seed: int = 0


def make_planner(name: str, options: PlannerOptions = PlannerOptions()):
    if name not in PLANNERS:
        raise ValueError(f"unknown planner {name!r}; choose from {', '.join(PLANNERS)}")
    cluster = options.cluster or DEFAULT_CLUSTER[name]
    if cluster not in CLUSTER_METHODS:
        raise ValueError(f"unknown clustering method {cluster!r}")
    if name == "greedy":
        return GreedyPlanner(cluster=cluster, k=options.k, seed=options.seed)
    if name == "ilp":
        return IlpPlanner(cluster=cluster, k=options.k, step_s=options.step_s,
                          time_limit_s=options.time_limit_s, oracle=options.oracle, seed=options.seed)
    if name == "qubo":
        return QuboPlanner(cluster=cluster, k=options.k, step_s=options.step_s, seed=options.seed)
    from .rl.planner import PolicyPlanner  # torch import is deferred to the planners that need it

    sims = DEFAULT_SIMULATIONS[name] if options.n_simulations is None else options.n_simulations
    policy = "classical" if name == "ppo" else "hybrid"
    return PolicyPlanner(checkpoint=options.checkpoint, policy=policy, n_simulations=sims,
                         seed=options.seed)


def split_instance(instance: ProblemInstance) -> Dict[str, ProblemInstance]:
    """One single-satellite instance per satellite."""
    return {sid: ProblemInstance({sid: recs}, tuple(r for r in instance.requests if r.satellite_id == sid),
                                 instance.config)
            for sid, recs in sorted(instance.satellites.items())}


def _plan_one(args):
    name, options, sub = args
    return make_planner(name, options).predict(sub)


def plan_instance(name: str, instance: ProblemInstance, options: PlannerOptions = PlannerOptions(),
                  jobs: int = 1) -> Plan:
    if jobs <= 1 or len(instance.satellites) <= 1:
        return make_planner(name, options).predict(instance)
    make_planner(name, options)  # fail fast on bad options
    subs = split_instance(instance)
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        parts = list(pool.map(_plan_one, [(name, options, s) for s in subs.values()]))
    seqs, dropped = {}, []
    for sid, part in zip(subs, parts):
        seqs[sid] = part.satellites.get(sid, ())
        dropped.extend(part.dropped)
    return make_plan(seqs, instance, dropped)


@dataclass(frozen=True)
class RunResult:
    planner: str
    plan: Plan
    report: ValidationReport
    wall_s: float

    @property
    def valid(self) -> bool:
        return self.report.ok


def run(name: str, instance: ProblemInstance, options: PlannerOptions = PlannerOptions(),
        jobs: int = 1) -> RunResult:
    t0 = time.perf_counter()
    plan = plan_instance(name, instance, options, jobs)
    wall = time.perf_counter() - t0
    report = validate_plan(plan, instance)
    if not report.ok:
        log.error("%s produced %d violations, first: %s", name, len(report.violations), report.violations[0])
    log.info("%s planned %d acquisitions in %.2f s", name, len(plan), wall)
    return RunResult(name, plan, report, wall)


def stats_rows(plan: Plan) -> List[tuple]:
    """(priority, total, completed, rate or None) per priority."""
    return [(p, s.total, s.completed, s.rate) for p, s in sorted(plan.stats.items())]
