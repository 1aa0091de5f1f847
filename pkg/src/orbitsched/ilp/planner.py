"""Turning solved cluster models into chained acquisitions and plans."""

from __future__ import annotations

import logging
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from sklearn.base import BaseEstimator

from ..chaining import exit_state
from ..clustering import make_clusters, split_clusters
from ..core import AcquisitionRequest, ChainedAcquisition, Plan, ProblemInstance, make_acquisition, make_plan
from ..geometry import NADIR, Attitude, Ephemeris
from .model import IlpModel, build_cluster_model, violated_rows
from .oracle import brute_force_oracle
from .solver import Assignment, solve_bb

log = logging.getLogger(__name__)


def assignment_sequence(assignment: Assignment, model: IlpModel) -> List[Tuple[int, int]]:
    """(request index, start index) in slot order."""
    slots = {}
    for kind, f, q in assignment.ones(model, "x"):
        slots[q] = f
    starts = {f: a for kind, f, a in assignment.ones(model, "y")}
    return [(slots[q], starts[slots[q]]) for q in sorted(slots)]


def extract_plan(assignment: Assignment, model: IlpModel, ephemeris: Ephemeris
                 ) -> List[ChainedAcquisition]:
    """Acquisitions in slot order; the first one relays from the grid's entry state."""
    bad = violated_rows(model, assignment.values)
    if bad:
        raise RuntimeError(f"assignment violates {len(bad)} rows, first {bad[0].name}")
    att, _ = model.grid.entry_state
    out = []
    for f, a in assignment_sequence(assignment, model):
        g = model.grid.entries[f]
        acq = make_acquisition(g.request, ephemeris, g.starts[a], att)
        out.append(acq)
        att = acq.end_attitude
    return out


Solver = Callable[[IlpModel], Assignment]


def plan_clusters(groups: Sequence[Sequence[AcquisitionRequest]], ephemeris: Ephemeris,
                  solve: Solver, step_s: int = 5,
                  initial: Optional[Tuple[Attitude, int]] = None) -> Tuple[List[ChainedAcquisition], List[str], list]:
    """Solve clusters one after another.

    Each cluster's windows are trimmed by the relay needed from where the
    previous cluster left the satellite, so clusters can be solved
    independently and simply concatenated.
    """
    state = initial if initial is not None else (NADIR, ephemeris.start_ms)
    seq: List[ChainedAcquisition] = []
    dropped: List[str] = []
    reports = []
    for group in groups:
        model = build_cluster_model(group, ephemeris, step_s, entry=state)
        dropped.extend(model.grid.excluded)
        sol = solve(model)
        part = extract_plan(sol, model, ephemeris)
        reports.append({"size": len(group), "vars": model.n_vars, "rows": len(model.rows),
                        "objective": sol.objective, "proven": sol.proven, "nodes": sol.nodes})
        if not sol.proven:
            log.info("cluster of %d requests not proven optimal (%d nodes)", len(group), sol.nodes)
        seq.extend(part)
        state = exit_state(part, state)
    return seq, dropped, reports


class IlpPlanner(BaseEstimator):
    """Per-cluster exact integer planner.

    Parameters
    ----------
    cluster : str
        Clustering method, see :data:`orbitsched.clustering.CLUSTER_METHODS`.
    k : int or None
        K-means cluster count (default: one per 8 requests).
    max_cluster_size : int
        Larger clusters are cut into consecutive chunks of this size.
    step_s : int
        Spacing of candidate start times.
    time_limit_s : float or None
        Per-cluster limit; the best assignment found so far is used on expiry.
    oracle : bool
        Solve with the exhaustive oracle instead of branch-and-bound.
    """

    def __init__(self, cluster="bunch-sort", k=None, max_cluster_size=8, step_s=5,
                 time_limit_s=10.0, oracle=False, seed=0):
        self.cluster = cluster
        self.k = k
        self.max_cluster_size = max_cluster_size
        self.step_s = step_s
        self.time_limit_s = time_limit_s
        self.oracle = oracle
        self.seed = seed

    def _solver(self) -> Solver:
        if self.oracle:
            return brute_force_oracle
        return lambda m: solve_bb(m, self.time_limit_s)

    def fit(self, instance: ProblemInstance, y=None):
        seqs: Dict[str, List[ChainedAcquisition]] = {}
        dropped: List[str] = []
        self.reports_ = []
        by_id = instance.by_id
        for sid, eph in instance.ephemerides.items():
            clusters = make_clusters(self.cluster, instance.pending(sid), self.k, self.seed)
            clusters = split_clusters(clusters, self.max_cluster_size)
            groups = [[by_id[i] for i in c.request_ids] for c in clusters]
            seqs[sid], lost, rep = plan_clusters(groups, eph, self._solver(), self.step_s)
            dropped += lost
            self.reports_ += rep
        self.plan_ = make_plan(seqs, instance, dropped)
        return self

    def predict(self, instance: ProblemInstance) -> Plan:
        return self.fit(instance).plan_
