"""
Domain types, JSON ingestion/serialisation and plan validation.

All timestamps are integer epoch milliseconds. Files are written in a
canonical form (sorted keys, UTF-8, LF) so that parse -> serialise is the
identity on files this module wrote.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from .geometry import (
    EARTH_RADIUS_KM,
    MAX_DEPOINTING_DEG,
    NADIR,
    SLEW_RATE_DEG_S,
    Attitude,
    Ephemeris,
    GeoPoint,
    acquisition_duration,
    end_attitude,
    maneuver_duration,
    min_relay_time,
    relay_search,
    start_attitude,
)

PRIORITIES = (1, 2, 3, 4)
LEO_BAND_KM = (EARTH_RADIUS_KM + 400.0, EARTH_RADIUS_KM + 2000.0)


class ParseError(ValueError):
    """Input file does not match the documented schema."""


class DataError(ValueError):
    """Input is well-formed but violates a domain invariant."""


# -- domain types ----------------------------------------------------------------------

@dataclass(frozen=True)
class EphemerisRecord:
    orbit_number: int
    timestamp_ms: int
    position_eci_km: Tuple[float, float, float]
    velocity_eci_km_s: Tuple[float, float, float]


@dataclass(frozen=True)
class AcquisitionRequest:
    request_id: str
    priority: int
    dto_start_ms: int
    dto_end_ms: int
    median_start: GeoPoint
    median_end: GeoPoint
    satellite_id: str
    completed: bool = False

    def __post_init__(self):
        if self.priority not in PRIORITIES:
            raise DataError(f"request {self.request_id}: priority {self.priority} outside 1-4")
        if not self.dto_start_ms < self.dto_end_ms:
            raise DataError(f"request {self.request_id}: dto_start_ms >= dto_end_ms")

    @cached_property
    def duration_ms(self) -> int:
        return acquisition_duration(self.median_start, self.median_end)


@dataclass(frozen=True)
class PhysicalConfig:
    rotation_rate_deg_s: float = SLEW_RATE_DEG_S
    max_depointing_deg: float = MAX_DEPOINTING_DEG
    earth_radius_km: float = EARTH_RADIUS_KM


@dataclass(frozen=True)
class ProblemInstance:
    satellites: Mapping[str, Tuple[EphemerisRecord, ...]]
    requests: Tuple[AcquisitionRequest, ...]
    config: PhysicalConfig = field(default_factory=PhysicalConfig)

    @cached_property
    def ephemerides(self) -> Dict[str, Ephemeris]:
        return {sid: Ephemeris.from_records(recs) for sid, recs in self.satellites.items()}

    @cached_property
    def by_id(self) -> Dict[str, AcquisitionRequest]:
        return {r.request_id: r for r in self.requests}

    def pending(self, satellite_id: Optional[str] = None) -> List[AcquisitionRequest]:
        """Requests still to plan (not pre-completed), optionally for one satellite."""
        return [r for r in self.requests
                if not r.completed and (satellite_id is None or r.satellite_id == satellite_id)]


@dataclass(frozen=True)
class ChainedAcquisition:
    request_id: str
    acquisition_start_ms: int
    acquisition_duration_ms: int
    relay_duration_s: int
    start_attitude: Attitude
    end_attitude: Attitude

    @property
    def end_ms(self) -> int:
        return self.acquisition_start_ms + self.acquisition_duration_ms


@dataclass(frozen=True)
class PriorityStats:
    total: int
    completed: int

    @property
    def rate(self) -> Optional[float]:
        return self.completed / self.total if self.total else None


@dataclass(frozen=True)
class Plan:
    satellites: Mapping[str, Tuple[ChainedAcquisition, ...]]
    stats: Mapping[int, PriorityStats] = field(default_factory=dict)
    dropped: Tuple[str, ...] = ()

    def completed_ids(self) -> List[str]:
        return [a.request_id for seq in self.satellites.values() for a in seq]

    def __len__(self):
        return sum(len(seq) for seq in self.satellites.values())


@dataclass(frozen=True)
class Violation:
    rule_id: str
    request_id: Optional[str]
    message: str


@dataclass(frozen=True)
class ValidationReport:
    violations: Tuple[Violation, ...] = ()
    notes: Tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations


def make_acquisition(request: AcquisitionRequest, ephemeris: Ephemeris, start_ms: int,
                     previous: Optional[Attitude]) -> ChainedAcquisition:
    """Build a chained acquisition; ``previous`` is the attitude held before the slew."""
    tau = request.duration_ms
    a0 = start_attitude(request, ephemeris, start_ms)
    a1 = end_attitude(request, ephemeris, start_ms + tau)
    relay = maneuver_duration(previous if previous is not None else NADIR, a0)
    return ChainedAcquisition(request.request_id, int(start_ms), tau, relay, a0, a1)


def compute_stats(completed_ids: Iterable[str], instance: ProblemInstance) -> Dict[int, PriorityStats]:
    done = set(completed_ids)
    out = {}
    for p in PRIORITIES:
        pool = [r for r in instance.requests if r.priority == p and not r.completed]
        out[p] = PriorityStats(len(pool), sum(r.request_id in done for r in pool))
    return out


def make_plan(sequences: Mapping[str, Sequence[ChainedAcquisition]], instance: ProblemInstance,
              dropped: Iterable[str] = ()) -> Plan:
    seqs = {sid: tuple(sequences.get(sid, ())) for sid in sorted(instance.satellites)}
    ids = [a.request_id for s in seqs.values() for a in s]
    return Plan(seqs, compute_stats(ids, instance), tuple(dropped))


# -- canonical JSON --------------------------------------------------------------------

def _dump_array(items: List[dict]) -> str:
    if not items:
        return "[]\n"
    body = ",\n".join(json.dumps(x, sort_keys=True, ensure_ascii=False) for x in items)
    return "[\n" + body + "\n]\n"


def _write_text(path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _load_json(path):
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: line {exc.lineno}: {exc.msg}") from exc


def _field(obj, key, where, kind=None):
    if not isinstance(obj, dict) or key not in obj:
        raise ParseError(f"{where}: missing field '{key}'")
    val = obj[key]
    if kind is int and (isinstance(val, bool) or not isinstance(val, int)):
        raise ParseError(f"{where}: field '{key}' must be an integer")
    if kind is float and (isinstance(val, bool) or not isinstance(val, (int, float))
                          or not math.isfinite(val)):
        raise ParseError(f"{where}: field '{key}' must be a finite number")
    if kind is str and not isinstance(val, str):
        raise ParseError(f"{where}: field '{key}' must be a string")
    if kind is bool and not isinstance(val, bool):
        raise ParseError(f"{where}: field '{key}' must be a boolean")
    return val


def _vec3(obj, key, where):
    val = _field(obj, key, where)
    if not (isinstance(val, list) and len(val) == 3):
        raise ParseError(f"{where}: field '{key}' must be a 3-element array")
    for v in val:
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            raise ParseError(f"{where}: field '{key}' must hold finite numbers")
    return tuple(float(v) for v in val)


def ephemeris_to_json(satellites: Mapping[str, Sequence[EphemerisRecord]]) -> str:
    items = []
    for sid in sorted(satellites):
        for r in satellites[sid]:
            items.append({
                "satellite_id": sid,
                "orbit_number": r.orbit_number,
                "timestamp_ms": r.timestamp_ms,
                "position_km": list(r.position_eci_km),
                "velocity_km_s": list(r.velocity_eci_km_s),
            })
    return _dump_array(items)


def parse_ephemeris_data(data) -> Dict[str, Tuple[EphemerisRecord, ...]]:
    if not isinstance(data, list):
        raise ParseError("ephemeris file must hold a JSON array")
    groups: Dict[str, List[EphemerisRecord]] = {}
    for i, obj in enumerate(data):
        where = f"record {i}"
        sid = _field(obj, "satellite_id", where, str)
        orbit = _field(obj, "orbit_number", where, int)
        ts = _field(obj, "timestamp_ms", where, int)
        pos = _vec3(obj, "position_km", where)
        vel = _vec3(obj, "velocity_km_s", where)
        if orbit < 0:
            raise DataError(f"{where}: negative orbit_number")
        radius = math.sqrt(sum(p * p for p in pos))
        if not LEO_BAND_KM[0] <= radius <= LEO_BAND_KM[1]:
            raise DataError(f"{where}: |position| = {radius:.1f} km outside LEO band")
        if not any(vel):
            raise DataError(f"{where}: zero velocity")
        recs = groups.setdefault(sid, [])
        if recs and ts <= recs[-1].timestamp_ms:
            kind = "duplicate" if ts == recs[-1].timestamp_ms else "decreasing"
            raise DataError(f"{where}: {kind} timestamp {ts} for satellite {sid}")
        recs.append(EphemerisRecord(orbit, ts, pos, vel))
    return {sid: tuple(recs) for sid, recs in sorted(groups.items())}


def parse_ephemeris(path) -> Dict[str, Tuple[EphemerisRecord, ...]]:
    """Read an ephemeris JSON file into per-satellite, time-ordered records."""
    return parse_ephemeris_data(_load_json(path))


def _geo(obj, key, where) -> GeoPoint:
    val = _field(obj, key, where)
    lat = _field(val, "lat", f"{where}.{key}", float)
    lon = _field(val, "lon", f"{where}.{key}", float)
    try:
        return GeoPoint(lat, lon)
    except ValueError as exc:
        raise DataError(f"{where}.{key}: {exc}") from exc


def requests_to_json(requests: Sequence[AcquisitionRequest]) -> str:
    items = [{
        "request_id": r.request_id,
        "priority": r.priority,
        "dto_start_ms": r.dto_start_ms,
        "dto_end_ms": r.dto_end_ms,
        "median_start": {"lat": r.median_start.latitude_deg, "lon": r.median_start.longitude_deg},
        "median_end": {"lat": r.median_end.latitude_deg, "lon": r.median_end.longitude_deg},
        "satellite_id": r.satellite_id,
        "completed": r.completed,
    } for r in requests]
    return _dump_array(items)


def parse_requests_data(data) -> List[AcquisitionRequest]:
    if not isinstance(data, list):
        raise ParseError("requests file must hold a JSON array")
    out, seen = [], set()
    for i, obj in enumerate(data):
        where = f"request {i}"
        rid = _field(obj, "request_id", where, str)
        if rid in seen:
            raise DataError(f"{where}: duplicate request_id {rid!r}")
        seen.add(rid)
        completed = obj.get("completed", False) if isinstance(obj, dict) else False
        if not isinstance(completed, bool):
            raise ParseError(f"{where}: field 'completed' must be a boolean")
        out.append(AcquisitionRequest(
            request_id=rid,
            priority=_field(obj, "priority", where, int),
            dto_start_ms=_field(obj, "dto_start_ms", where, int),
            dto_end_ms=_field(obj, "dto_end_ms", where, int),
            median_start=_geo(obj, "median_start", where),
            median_end=_geo(obj, "median_end", where),
            satellite_id=_field(obj, "satellite_id", where, str),
            completed=completed,
        ))
    return out


def parse_requests(path) -> List[AcquisitionRequest]:
    """Read a requests JSON file; ``completed`` defaults to false."""
    return parse_requests_data(_load_json(path))


def make_instance(satellites, requests, config: Optional[PhysicalConfig] = None) -> ProblemInstance:
    """Assemble an instance and check cross-file invariants."""
    inst = ProblemInstance({k: tuple(v) for k, v in satellites.items()}, tuple(requests),
                           config or PhysicalConfig())
    for r in inst.requests:
        recs = inst.satellites.get(r.satellite_id)
        if recs is None:
            raise DataError(f"request {r.request_id}: unknown satellite {r.satellite_id!r}")
        if r.dto_start_ms < recs[0].timestamp_ms or r.dto_end_ms > recs[-1].timestamp_ms:
            raise DataError(f"request {r.request_id}: DTO outside the ephemeris span")
    return inst


EPHEMERIS_FILE = "ephemeris.json"
REQUESTS_FILE = "requests.json"


def write_instance(instance: ProblemInstance, out_dir) -> Tuple[str, str]:
    os.makedirs(out_dir, exist_ok=True)
    ep = os.path.join(out_dir, EPHEMERIS_FILE)
    rp = os.path.join(out_dir, REQUESTS_FILE)
    _write_text(ep, ephemeris_to_json(instance.satellites))
    _write_text(rp, requests_to_json(instance.requests))
    return ep, rp


def load_instance(path, requests_path=None) -> ProblemInstance:
    """Load from a directory holding both files, or from explicit file paths."""
    if requests_path is None:
        ep, rp = os.path.join(path, EPHEMERIS_FILE), os.path.join(path, REQUESTS_FILE)
    else:
        ep, rp = path, requests_path
    return make_instance(parse_ephemeris(ep), parse_requests(rp))


def _att_json(a: Attitude) -> dict:
    return {"roll_deg": a.roll_deg, "pitch_deg": a.pitch_deg, "yaw_deg": a.yaw_deg}


def plan_to_dict(plan: Plan) -> dict:
    sats = {sid: [{
        "request_id": a.request_id,
        "acquisition_start_ms": a.acquisition_start_ms,
        "acquisition_duration_ms": a.acquisition_duration_ms,
        "relay_duration_s": a.relay_duration_s,
        "start_attitude": _att_json(a.start_attitude),
        "end_attitude": _att_json(a.end_attitude),
    } for a in seq] for sid, seq in plan.satellites.items()}
    stats = {f"p{p}": {"total": s.total, "completed": s.completed, "rate": s.rate}
             for p, s in sorted(plan.stats.items())}
    out = {"satellites": sats, "stats": stats}
    if plan.dropped:
        out["dropped"] = list(plan.dropped)
    return out


def plan_to_json(plan: Plan) -> str:
    return json.dumps(plan_to_dict(plan), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def plan_from_dict(data) -> Plan:
    def att(obj, where):
        return Attitude(_field(obj, "roll_deg", where, float), _field(obj, "pitch_deg", where, float),
                        _field(obj, "yaw_deg", where, float))

    sats = {}
    for sid, seq in _field(data, "satellites", "plan").items():
        items = []
        for i, a in enumerate(seq):
            where = f"plan.satellites.{sid}[{i}]"
            items.append(ChainedAcquisition(
                _field(a, "request_id", where, str),
                _field(a, "acquisition_start_ms", where, int),
                _field(a, "acquisition_duration_ms", where, int),
                _field(a, "relay_duration_s", where, int),
                att(_field(a, "start_attitude", where), where),
                att(_field(a, "end_attitude", where), where),
            ))
        sats[sid] = tuple(items)
    stats = {}
    for key, s in data.get("stats", {}).items():
        stats[int(key[1:])] = PriorityStats(int(s["total"]), int(s["completed"]))
    return Plan(sats, stats, tuple(data.get("dropped", ())))


def write_plan(plan: Plan, path) -> None:
    _write_text(path, plan_to_json(plan))


def read_plan(path) -> Plan:
    return plan_from_dict(_load_json(path))


# -- validation ------------------------------------------------------------------------

_ATT_TOL_DEG = 1e-6


def _att_close(a: Attitude, b: Attitude) -> bool:
    return all(abs(x - y) <= _ATT_TOL_DEG for x, y in zip(a, b))


def validate_plan(plan: Plan, instance: ProblemInstance) -> ValidationReport:
    """Re-check a plan against the instance using independent geometry calls.

    Per satellite: known ids, uniqueness, DTO containment, durations and
    attitudes, strictly increasing starts, and for every consecutive pair
    ``start2 >= end1 + t_min * 1000`` plus the slew fitting the actual gap.
    The first acquisition must be reachable from nadir at the ephemeris start.
    Priority ordering is reported as notes only.
    """
    v: List[Violation] = []
    notes: List[str] = []
    seen = set()
    by_id = instance.by_id

    for sid, seq in plan.satellites.items():
        eph = instance.ephemerides.get(sid)
        if eph is None:
            v.append(Violation("unknown_satellite", None, f"satellite {sid!r} not in instance"))
            continue
        prev: Optional[Tuple[AcquisitionRequest, ChainedAcquisition]] = None
        for acq in seq:
            req = by_id.get(acq.request_id)
            if req is None:
                v.append(Violation("unknown_request", acq.request_id, "request not in instance"))
                prev = None
                continue
            if acq.request_id in seen:
                v.append(Violation("duplicate_request", acq.request_id, "request planned twice"))
            seen.add(acq.request_id)
            if req.satellite_id != sid:
                v.append(Violation("satellite_mismatch", req.request_id,
                                   f"assigned to {req.satellite_id}, planned on {sid}"))
            if req.completed:
                v.append(Violation("already_completed", req.request_id, "request was pre-completed"))
            if acq.acquisition_duration_ms != req.duration_ms:
                v.append(Violation("duration_mismatch", req.request_id,
                                   f"{acq.acquisition_duration_ms} ms != {req.duration_ms} ms"))
            start, end = acq.acquisition_start_ms, acq.acquisition_start_ms + req.duration_ms
            if start < req.dto_start_ms or end > req.dto_end_ms:
                v.append(Violation("dto_containment", req.request_id,
                                   f"[{start}, {end}] not inside [{req.dto_start_ms}, {req.dto_end_ms}]"))
                prev = (req, acq)
                continue
            a0 = start_attitude(req, eph, start)
            a1 = end_attitude(req, eph, end)
            if not (_att_close(a0, acq.start_attitude) and _att_close(a1, acq.end_attitude)):
                v.append(Violation("attitude_mismatch", req.request_id, "stored attitudes disagree"))

            if prev is None:
                d0 = relay_search(NADIR, eph.start_ms, req, eph)
                slew = maneuver_duration(NADIR, a0)
                if d0 is None or start < eph.start_ms + d0 * 1000 or slew * 1000 > start - eph.start_ms:
                    v.append(Violation("initial_slew", req.request_id, "not reachable from nadir"))
            else:
                preq, pacq = prev
                pend = pacq.acquisition_start_ms + preq.duration_ms
                if start <= pacq.acquisition_start_ms:
                    v.append(Violation("ordering", req.request_id, "start times not increasing"))
                else:
                    tmin = min_relay_time(pend, preq, req, eph)
                    slew = maneuver_duration(end_attitude(preq, eph, pend), a0)
                    if tmin is None:
                        v.append(Violation("chaining", req.request_id,
                                           f"no feasible relay from {preq.request_id}"))
                    elif start < pend + tmin * 1000:
                        v.append(Violation("chaining", req.request_id,
                                           f"starts {pend + tmin * 1000 - start} ms too early after "
                                           f"{preq.request_id}"))
                    elif slew * 1000 > start - pend:
                        v.append(Violation("chaining", req.request_id,
                                           f"slew {slew} s exceeds gap after {preq.request_id}"))
            prev = (req, acq)

    done = set(seen)
    for sid in plan.satellites:
        pending = [r for r in instance.pending(sid)]
        for p in PRIORITIES[:-1]:
            missed = sum(1 for r in pending if r.priority == p and r.request_id not in done)
            lower = sum(1 for r in pending if r.priority > p and r.request_id in done)
            if missed and lower:
                notes.append(f"{sid}: {missed} priority-{p} requests missed while "
                             f"{lower} lower-priority requests were completed")
    return ValidationReport(tuple(v), tuple(notes))
