"""
Greedy baseline scheduler.

Each cluster is scheduled on its own: a 1 s clock starts at the satellite's
ephemeris start with the camera at nadir. At every tick the open, reachable
requests of the cluster compete: the highest priority wins, ties go to the
earlier DTO end. The winner is committed after the shortest whole-second
relay and the clock jumps to the end of its acquisition. The per-cluster
sequences are then joined by :func:`~orbitsched.chaining.link_clusters`.
"""

from __future__ import annotations

from typing import Dict, List, Sequence, Tuple

from sklearn.base import BaseEstimator

from .chaining import earliest_start, link_clusters
from .clustering import Cluster, make_clusters
from .core import AcquisitionRequest, ChainedAcquisition, Plan, ProblemInstance, make_acquisition, make_plan
from .geometry import NADIR, Ephemeris


def _clusters_for(sat_id: str, clusters: Sequence[Cluster], by_id) -> List[List[AcquisitionRequest]]:
    out = []
    for c in clusters:
        members = [by_id[i] for i in c.request_ids if by_id[i].satellite_id == sat_id
                   and not by_id[i].completed]
        if members:
            out.append(members)
    out.sort(key=lambda m: min(r.dto_start_ms for r in m))
    return out


def greedy_cluster(group: Sequence[AcquisitionRequest], eph: Ephemeris, initial=None
                   ) -> List[ChainedAcquisition]:
    """Run the greedy clock over one cluster, from nadir at the ephemeris start by default."""
    att, anchor = initial if initial is not None else (NADIR, eph.start_ms)
    clock = anchor
    out: List[ChainedAcquisition] = []
    if group:
        remaining = list(group)
        while remaining:
            if clock > max(r.dto_end_ms for r in remaining):
                break
            best, best_start = None, None
            for r in remaining:
                if not r.dto_start_ms <= clock <= r.dto_end_ms:
                    continue
                s = earliest_start(r, eph, att, clock)
                if s is None:
                    continue
                key = (r.priority, r.dto_end_ms, r.request_id)
                if best is None or key < (best.priority, best.dto_end_ms, best.request_id):
                    best, best_start = r, s
            if best is not None:
                acq = make_acquisition(best, eph, best_start, att)
                out.append(acq)
                remaining.remove(best)
                att, anchor = acq.end_attitude, acq.end_ms
                clock = anchor
                continue
            # With the attitude unchanged no open request becomes reachable later,
            # so the clock can jump to the next DTO opening on its 1 s grid.
            later = [r.dto_start_ms for r in remaining if r.dto_start_ms > clock]
            if not later:
                break
            clock = anchor + -((anchor - min(later)) // 1000) * 1000
    return out


def greedy_satellite(groups: Sequence[Sequence[AcquisitionRequest]], eph: Ephemeris,
                     by_id) -> Tuple[List[ChainedAcquisition], List[str]]:
    """Schedule every cluster independently, then link them; returns (sequence, dropped)."""
    return link_clusters([greedy_cluster(g, eph) for g in groups], by_id, eph)


def greedy_schedule(instance: ProblemInstance, clusters: Sequence[Cluster]) -> Plan:
    """Greedy plan for every satellite; ``clusters`` partition the pending requests."""
    by_id = instance.by_id
    seqs: Dict[str, List[ChainedAcquisition]] = {}
    dropped: List[str] = []
    for sid, eph in instance.ephemerides.items():
        seqs[sid], lost = greedy_satellite(_clusters_for(sid, clusters, by_id), eph, by_id)
        dropped += lost
    return make_plan(seqs, instance, dropped)


class GreedyPlanner(BaseEstimator):
    """Estimator wrapper: ``fit`` clusters and schedules, ``predict`` returns the plan."""

    def __init__(self, cluster="kmeans", k=None, seed=0):
        self.cluster = cluster
        self.k = k
        self.seed = seed

    def fit(self, instance: ProblemInstance, y=None):
        clusters = []
        for sid in instance.ephemerides:
            clusters += make_clusters(self.cluster, instance.pending(sid), self.k, self.seed)
        self.plan_ = greedy_schedule(instance, clusters)
        return self

    def predict(self, instance: ProblemInstance) -> Plan:
        return self.fit(instance).plan_
