"""
Solution chaining and cluster linking.

``chain`` turns an ordered list of (request, intended start) candidates into
time-feasible acquisitions, shifting starts later by whole seconds when the
relay needs more room and failing fast otherwise. ``link_clusters`` joins
per-cluster sequences, shifting or dropping requests at the seams.
"""

from __future__ import annotations

import csv
import io
import math
from typing import Dict, List, Optional, Sequence, Tuple

from .core import AcquisitionRequest, ChainedAcquisition, Plan, make_acquisition
from .geometry import NADIR, Attitude, Ephemeris, maneuver_duration, relay_search, start_attitude


class ChainError(ValueError):
    """A candidate cannot follow its predecessor inside its DTO window.

    Attributes
    ----------
    pair : (str or None, str)
        Ids of the predecessor (None for the initial nadir state) and the
        unchainable request.
    deficit_s : int
        Seconds missing between the earliest feasible start and the latest
        start the DTO allows.
    """

    def __init__(self, pair, deficit_s):
        self.pair = pair
        self.deficit_s = deficit_s
        super().__init__(f"cannot chain {pair[0]} -> {pair[1]}: short by {deficit_s} s")


def _fits(request, eph, att, t_from, start) -> bool:
    if start < request.dto_start_ms or start + request.duration_ms > request.dto_end_ms:
        return False
    slew = maneuver_duration(att, start_attitude(request, eph, start))
    return slew * 1000 <= start - t_from


def earliest_start(request: AcquisitionRequest, eph: Ephemeris, att: Attitude, t_from: int,
                   not_before: Optional[int] = None) -> Optional[int]:
    """Earliest start reachable by a whole-second relay from ``att`` held since ``t_from``."""
    d = relay_search(att, t_from, request, eph, not_before_ms=not_before,
                     duration_ms=request.duration_ms)
    return None if d is None else t_from + d * 1000


def place_after(request: AcquisitionRequest, eph: Ephemeris, att: Attitude, t_from: int,
                intended: int) -> Tuple[Optional[int], int]:
    """Start for ``request`` at or after ``intended``, shifted by minimal whole seconds.

    Returns ``(start, deficit_s)``; ``start`` is None when no shift keeps the
    acquisition inside its DTO, and ``deficit_s`` then says how far short it is.
    """
    tau = request.duration_ms
    latest = request.dto_end_ms - tau
    lower = earliest_start(request, eph, att, t_from)
    if lower is None:
        # slew measured at the last admissible instant bounds how much is missing
        t = max(min(latest, eph.end_ms), t_from)
        need = t_from + max(1, maneuver_duration(att, start_attitude(request, eph, t))) * 1000
        need = max(need, request.dto_start_ms)
        return None, max(1, math.ceil((need - latest) / 1000))
    k = max(0, -((intended - lower) // 1000))
    s = intended + k * 1000
    while s <= latest:
        if s >= lower and _fits(request, eph, att, t_from, s):
            return s, 0
        s += 1000
    return None, max(1, math.ceil((max(lower, intended) - latest) / 1000))


def chain(candidates: Sequence[Tuple[AcquisitionRequest, int]], ephemeris: Ephemeris, *,
          initial: Optional[Tuple[Attitude, int]] = None,
          previous_id: Optional[str] = None) -> List[ChainedAcquisition]:
    """Chain ordered candidates on one satellite.

    ``initial`` is the (attitude, time) the satellite holds before the first
    candidate; it defaults to nadir at the ephemeris start. Input order is
    kept. Raises :class:`ChainError` on the first pair that cannot be joined.
    """
    att, t = initial if initial is not None else (NADIR, ephemeris.start_ms)
    prev_id = previous_id
    out: List[ChainedAcquisition] = []
    for req, intended in candidates:
        start, deficit = place_after(req, ephemeris, att, t, int(intended))
        if start is None:
            raise ChainError((prev_id, req.request_id), deficit)
        acq = make_acquisition(req, ephemeris, start, att)
        out.append(acq)
        att, t, prev_id = acq.end_attitude, acq.end_ms, req.request_id
    return out


def link_clusters(per_cluster: Sequence[Sequence[ChainedAcquisition]],
                  requests: Dict[str, AcquisitionRequest], ephemeris: Ephemeris, *,
                  initial: Optional[Tuple[Attitude, int]] = None
                  ) -> Tuple[List[ChainedAcquisition], List[str]]:
    """Join cluster sequences into one, repairing conflicts.

    Acquisitions are taken in order of their planned start (earlier clusters
    win ties), so time-disjoint clusters are simply concatenated. Each one
    keeps its start when still reachable from the previous acquisition;
    otherwise it moves later by the minimal number of whole seconds, or is
    dropped when its DTO cannot hold it any more. Returns the linked sequence
    and the dropped ids.
    """
    att, t = initial if initial is not None else (NADIR, ephemeris.start_ms)
    merged = sorted(((a.acquisition_start_ms, ci, pos, a) for ci, seq in enumerate(per_cluster)
                     for pos, a in enumerate(seq)), key=lambda e: e[:3])
    out: List[ChainedAcquisition] = []
    dropped: List[str] = []
    for _, _, _, acq in merged:
        req = requests[acq.request_id]
        start, _ = place_after(req, ephemeris, att, t, acq.acquisition_start_ms)
        if start is None:
            dropped.append(req.request_id)
            continue
        new = make_acquisition(req, ephemeris, start, att)
        out.append(new)
        att, t = new.end_attitude, new.end_ms
    return out, dropped


def trim_windows(requests: Sequence[AcquisitionRequest], ephemeris: Ephemeris,
                 att: Attitude, t_from: int) -> Dict[str, Optional[int]]:
    """Effective DTO start of each request given the state left by the previous cluster."""
    return {r.request_id: earliest_start(r, ephemeris, att, t_from) for r in requests}


def exit_state(seq: Sequence[ChainedAcquisition], default: Tuple[Attitude, int]) -> Tuple[Attitude, int]:
    return (seq[-1].end_attitude, seq[-1].end_ms) if seq else default


def gantt_rows(plan: Plan) -> List[Tuple[str, int, int, int]]:
    rows = []
    for sid in sorted(plan.satellites):
        for a in plan.satellites[sid]:
            rows.append((a.request_id, a.acquisition_start_ms, a.end_ms, a.relay_duration_s))
    return rows


def gantt_csv(plan: Plan) -> str:
    """Gantt description: one row per acquisition (request_id, start_ms, end_ms, relay_s)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["request_id", "start_ms", "end_ms", "relay_s"])
    w.writerows(gantt_rows(plan))
    return buf.getvalue()
