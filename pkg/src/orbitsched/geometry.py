"""
Spherical-Earth kinematics for agile imaging satellites.

The Earth is a perfect sphere of radius 6371 km turning at the sidereal rate;
at ``REFERENCE_EPOCH_MS`` Greenwich longitude lies on the inertial x-axis.
Satellite attitudes are expressed in the local orbital frame (LOF):

- z points to nadir,
- x is the velocity direction projected orthogonally to the radius,
- y completes the right-handed triad (z cross x).

A boresight ``b`` in the LOF maps to ``roll = asin(b_y)`` and
``pitch = atan2(b_x, b_z)``; yaw stays at zero. The satellite slews at a
constant 1 deg/s, so a maneuver lasts ``ceil(angle)`` seconds.

Scalar hot paths use :mod:`math` on tuples; the DTO scan is vectorised.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from typing import NamedTuple, Protocol, Sequence

import numpy as np

EARTH_RADIUS_KM = 6371.0
MU_EARTH_KM3_S2 = 398600.4418
SIDEREAL_DAY_S = 86164.0
SIDEREAL_DAY_MS = 86_164_000
REFERENCE_EPOCH_MS = 0
ORBITS_PER_DAY = 15
ORBITAL_PERIOD_S = 86400.0 / ORBITS_PER_DAY
MAX_DEPOINTING_DEG = 45.0
SLEW_RATE_DEG_S = 1.0
GROUND_SPEED_KM_S = 2.0 * math.pi * EARTH_RADIUS_KM / ORBITAL_PERIOD_S

# Upper bound on how fast a ground target drifts across the LOF (deg/s).
# Nadir at 400 km gives ~1.2 deg/s; relay_search uses it to skip seconds that
# cannot satisfy the slew condition, which leaves its result unchanged.
MAX_TARGET_DRIFT_DEG_S = 2.0

_ANGLE_EPS = 1e-9


class OutOfSpanError(ValueError):
    """A timestamp falls outside the ephemeris span."""


class NoOpportunityError(ValueError):
    """A ground point is never within the depointing limit."""


@dataclass(frozen=True)
class GeoPoint:
    latitude_deg: float
    longitude_deg: float

    def __post_init__(self):
        lat = float(self.latitude_deg)
        lon = float(self.longitude_deg)
        if not (math.isfinite(lat) and math.isfinite(lon)):
            raise ValueError(f"non-finite coordinates ({lat}, {lon})")
        if not -90.0 <= lat <= 90.0:
            raise ValueError(f"latitude {lat} outside [-90, 90]")
        if not -180.0 <= lon < 180.0:
            lon = (lon + 180.0) % 360.0 - 180.0
        object.__setattr__(self, "latitude_deg", lat)
        object.__setattr__(self, "longitude_deg", lon)


class Vec3(NamedTuple):
    x: float
    y: float
    z: float


class SatelliteState(NamedTuple):
    timestamp_ms: int
    position_eci_km: Vec3
    velocity_eci_km_s: Vec3


class Attitude(NamedTuple):
    roll_deg: float
    pitch_deg: float
    yaw_deg: float = 0.0


NADIR = Attitude(0.0, 0.0, 0.0)


@dataclass(frozen=True)
class DtoWindow:
    start_ms: int
    end_ms: int

    def __post_init__(self):
        if not self.start_ms < self.end_ms:
            raise ValueError(f"empty DTO window [{self.start_ms}, {self.end_ms}]")


class _Request(Protocol):
    dto_start_ms: int
    dto_end_ms: int
    median_start: GeoPoint
    median_end: GeoPoint


# -- small vector helpers -----------------------------------------------------

def _dot(a, b):
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]


def _cross(a, b):
    return (a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0])


def _norm(a):
    return math.sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2])


def _unit(a):
    n = _norm(a)
    return (a[0] / n, a[1] / n, a[2] / n)


def _angle_between(a, b) -> float:
    """Angle in degrees between two vectors, stable near 0 and 180."""
    return math.degrees(math.atan2(_norm(_cross(a, b)), _dot(a, b)))


# -- Earth frame ----------------------------------------------------------------

def earth_rotation_angle(timestamp_ms: int) -> float:
    """Greenwich angle (rad) relative to the inertial x-axis."""
    elapsed = (int(timestamp_ms) - REFERENCE_EPOCH_MS) % SIDEREAL_DAY_MS
    return 2.0 * math.pi * elapsed / SIDEREAL_DAY_MS


def geodetic_to_eci(point: GeoPoint, timestamp_ms: int) -> Vec3:
    """Inertial position (km) of a surface point at ``timestamp_ms``."""
    lat = math.radians(point.latitude_deg)
    ang = math.radians(point.longitude_deg) + earth_rotation_angle(timestamp_ms)
    c = math.cos(lat)
    return Vec3(EARTH_RADIUS_KM * c * math.cos(ang),
                EARTH_RADIUS_KM * c * math.sin(ang),
                EARTH_RADIUS_KM * math.sin(lat))


def eci_to_geodetic(position, timestamp_ms: int) -> GeoPoint:
    """Geocentric latitude/longitude below an inertial position."""
    x, y, z = position
    lat = math.degrees(math.atan2(z, math.hypot(x, y)))
    lon = math.degrees(math.atan2(y, x) - earth_rotation_angle(timestamp_ms))
    return GeoPoint(lat, lon)


def great_circle_deg(a: GeoPoint, b: GeoPoint) -> float:
    """Central angle between two surface points (haversine)."""
    p1, p2 = math.radians(a.latitude_deg), math.radians(b.latitude_deg)
    dlat = p2 - p1
    dlon = math.radians(b.longitude_deg - a.longitude_deg)
    h = math.sin(dlat / 2) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dlon / 2) ** 2
    return math.degrees(2.0 * math.asin(min(1.0, math.sqrt(h))))


def great_circle_km(a: GeoPoint, b: GeoPoint) -> float:
    return math.radians(great_circle_deg(a, b)) * EARTH_RADIUS_KM


def _to_unit(point: GeoPoint):
    lat, lon = math.radians(point.latitude_deg), math.radians(point.longitude_deg)
    return (math.cos(lat) * math.cos(lon), math.cos(lat) * math.sin(lon), math.sin(lat))


def _from_unit(u) -> GeoPoint:
    return GeoPoint(math.degrees(math.atan2(u[2], math.hypot(u[0], u[1]))),
                    math.degrees(math.atan2(u[1], u[0])))


def midpoint(a: GeoPoint, b: GeoPoint) -> GeoPoint:
    """Great-circle midpoint of two non-antipodal points."""
    ua, ub = _to_unit(a), _to_unit(b)
    return _from_unit((ua[0] + ub[0], ua[1] + ub[1], ua[2] + ub[2]))


def destination(point: GeoPoint, bearing_deg: float, distance_km: float) -> GeoPoint:
    """Point reached by travelling ``distance_km`` along an initial bearing."""
    lat1 = math.radians(point.latitude_deg)
    lon1 = math.radians(point.longitude_deg)
    brg = math.radians(bearing_deg)
    d = distance_km / EARTH_RADIUS_KM
    lat2 = math.asin(math.sin(lat1) * math.cos(d) + math.cos(lat1) * math.sin(d) * math.cos(brg))
    lon2 = lon1 + math.atan2(math.sin(brg) * math.sin(d) * math.cos(lat1),
                             math.cos(d) - math.sin(lat1) * math.sin(lat2))
    return GeoPoint(math.degrees(lat2), math.degrees(lon2))


# -- ephemeris --------------------------------------------------------------------

class Ephemeris:
    """Time-ordered satellite states with linear interpolation.

    Parameters
    ----------
    timestamps_ms : sequence of int
        Strictly increasing epoch milliseconds.
    positions_km, velocities_km_s : sequence of 3-vectors
        ECI states at each timestamp.
    """

    def __init__(self, timestamps_ms: Sequence[int], positions_km, velocities_km_s):
        ts = [int(t) for t in timestamps_ms]
        if len(ts) < 2:
            raise ValueError("an ephemeris needs at least two records")
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValueError("ephemeris timestamps must be strictly increasing")
        self.timestamps_ms = ts
        self.positions = [tuple(map(float, p)) for p in positions_km]
        self.velocities = [tuple(map(float, v)) for v in velocities_km_s]
        if not len(self.positions) == len(self.velocities) == len(ts):
            raise ValueError("ephemeris arrays differ in length")
        self._t_arr = np.asarray(ts, dtype=np.int64)
        self._p_arr = np.asarray(self.positions, dtype=float)

    @classmethod
    def from_records(cls, records) -> "Ephemeris":
        return cls([r.timestamp_ms for r in records],
                   [r.position_eci_km for r in records],
                   [r.velocity_eci_km_s for r in records])

    @property
    def start_ms(self) -> int:
        return self.timestamps_ms[0]

    @property
    def end_ms(self) -> int:
        return self.timestamps_ms[-1]

    def __len__(self):
        return len(self.timestamps_ms)

    def state_at(self, timestamp_ms: int) -> SatelliteState:
        t = int(timestamp_ms)
        ts = self.timestamps_ms
        if t < ts[0] or t > ts[-1]:
            raise OutOfSpanError(f"t={t} outside ephemeris span [{ts[0]}, {ts[-1]}]")
        i = bisect.bisect_right(ts, t) - 1
        if ts[i] == t:
            return SatelliteState(t, Vec3(*self.positions[i]), Vec3(*self.velocities[i]))
        w = (t - ts[i]) / (ts[i + 1] - ts[i])
        p0, p1 = self.positions[i], self.positions[i + 1]
        v0, v1 = self.velocities[i], self.velocities[i + 1]
        return SatelliteState(
            t,
            Vec3(p0[0] + w * (p1[0] - p0[0]), p0[1] + w * (p1[1] - p0[1]), p0[2] + w * (p1[2] - p0[2])),
            Vec3(v0[0] + w * (v1[0] - v0[0]), v0[1] + w * (v1[1] - v0[1]), v0[2] + w * (v1[2] - v0[2])),
        )

    def positions_at(self, timestamps_ms: np.ndarray) -> np.ndarray:
        """Vectorised position interpolation, shape (n, 3)."""
        t = np.asarray(timestamps_ms, dtype=np.int64)
        if t.size and (t.min() < self.start_ms or t.max() > self.end_ms):
            raise OutOfSpanError("timestamps outside ephemeris span")
        tf = t.astype(float)
        src = self._t_arr.astype(float)
        return np.stack([np.interp(tf, src, self._p_arr[:, k]) for k in range(3)], axis=1)


def interpolate_state(ephemeris: Ephemeris, timestamp_ms: int) -> SatelliteState:
    return ephemeris.state_at(timestamp_ms)


# -- attitudes ----------------------------------------------------------------------

def _lof_axes(state: SatelliteState):
    r, v = state.position_eci_km, state.velocity_eci_km_s
    z = _unit((-r[0], -r[1], -r[2]))
    vr = _dot(v, z)
    x = _unit((v[0] - vr * z[0], v[1] - vr * z[1], v[2] - vr * z[2]))
    y = _cross(z, x)
    return x, y, z


def boresight_lof(state: SatelliteState, target: GeoPoint, timestamp_ms: int):
    """Unit vector satellite->target expressed in the LOF."""
    p = geodetic_to_eci(target, timestamp_ms)
    r = state.position_eci_km
    los = _unit((p[0] - r[0], p[1] - r[1], p[2] - r[2]))
    x, y, z = _lof_axes(state)
    return (_dot(los, x), _dot(los, y), _dot(los, z))


def attitude_from_boresight(b) -> Attitude:
    roll = math.degrees(math.asin(max(-1.0, min(1.0, b[1]))))
    pitch = math.degrees(math.atan2(b[0], b[2]))
    if pitch == -180.0:
        pitch = 180.0
    return Attitude(roll, pitch, 0.0)


def boresight_from_attitude(att: Attitude):
    r, p = math.radians(att.roll_deg), math.radians(att.pitch_deg)
    return (math.sin(p) * math.cos(r), math.sin(r), math.cos(p) * math.cos(r))


def attitude_pointing(state: SatelliteState, target: GeoPoint, timestamp_ms: int) -> Attitude:
    """Roll/pitch (yaw 0) that aims the boresight at ``target``."""
    return attitude_from_boresight(boresight_lof(state, target, timestamp_ms))


def angular_separation(a1: Attitude, a2: Attitude) -> float:
    return _angle_between(boresight_from_attitude(a1), boresight_from_attitude(a2))


def maneuver_duration(a1: Attitude, a2: Attitude) -> int:
    """Whole seconds needed to slew between two attitudes (rounded up)."""
    return max(0, math.ceil(angular_separation(a1, a2) / SLEW_RATE_DEG_S - _ANGLE_EPS))


def acquisition_duration(median_start: GeoPoint, median_end: GeoPoint) -> int:
    """Imaging time (ms) to sweep the median line at ground-track speed, >= 1 s."""
    ms = great_circle_km(median_start, median_end) / GROUND_SPEED_KM_S * 1000.0
    return max(1000, int(round(ms)))


def start_attitude(request: _Request, ephemeris: Ephemeris, timestamp_ms: int) -> Attitude:
    return attitude_pointing(ephemeris.state_at(timestamp_ms), request.median_start, timestamp_ms)


def end_attitude(request: _Request, ephemeris: Ephemeris, timestamp_ms: int) -> Attitude:
    return attitude_pointing(ephemeris.state_at(timestamp_ms), request.median_end, timestamp_ms)


# -- depointing and DTO windows -----------------------------------------------------------

def depointing_angle(state: SatelliteState, target: GeoPoint, timestamp_ms: int) -> float:
    """Off-nadir angle (deg) to ``target``; 180 when it is below the horizon."""
    p = geodetic_to_eci(target, timestamp_ms)
    r = state.position_eci_km
    los = (p[0] - r[0], p[1] - r[1], p[2] - r[2])
    if _dot(p, los) >= 0.0:
        return 180.0
    return _angle_between(los, (-r[0], -r[1], -r[2]))


def _depointing_vec(ephemeris: Ephemeris, target: GeoPoint, t_ms: np.ndarray) -> np.ndarray:
    r = ephemeris.positions_at(t_ms)
    lat = math.radians(target.latitude_deg)
    elapsed = (t_ms - REFERENCE_EPOCH_MS) % SIDEREAL_DAY_MS
    ang = math.radians(target.longitude_deg) + 2.0 * np.pi * elapsed / SIDEREAL_DAY_MS
    c = math.cos(lat)
    p = np.stack([EARTH_RADIUS_KM * c * np.cos(ang), EARTH_RADIUS_KM * c * np.sin(ang),
                  np.full(ang.shape, EARTH_RADIUS_KM * math.sin(lat))], axis=1)
    los = p - r
    cross = np.cross(los, -r)
    out = np.degrees(np.arctan2(np.linalg.norm(cross, axis=1), np.einsum("ij,ij->i", los, -r)))
    out[np.einsum("ij,ij->i", p, los) >= 0.0] = 180.0
    return out


def _inside(ephemeris, target, t) -> bool:
    return depointing_angle(ephemeris.state_at(t), target, t) <= MAX_DEPOINTING_DEG


def compute_dto_window(request: _Request, ephemeris: Ephemeris, *, around_ms: int | None = None) -> DtoWindow:
    """Visibility window of the median-line midpoint within the depointing limit.

    The ephemeris is scanned at 1 s and each edge is refined by bisection to
    1 ms. When several passes qualify, the pass containing (or nearest to)
    ``around_ms`` is returned, else the first one.

    Raises
    ------
    NoOpportunityError
        If the point never comes within the depointing limit.
    """
    target = midpoint(request.median_start, request.median_end)
    lo, hi = ephemeris.start_ms, ephemeris.end_ms
    if around_ms is not None:
        half = int(ORBITAL_PERIOD_S * 500)
        lo, hi = max(lo, int(around_ms) - half), min(hi, int(around_ms) + half)
    grid = np.arange(lo, hi + 1, 1000, dtype=np.int64)
    if grid[-1] != hi:
        grid = np.append(grid, hi)
    ok = _depointing_vec(ephemeris, target, grid) <= MAX_DEPOINTING_DEG
    if not ok.any():
        if around_ms is not None:
            return compute_dto_window(request, ephemeris)
        raise NoOpportunityError(f"{target} never within {MAX_DEPOINTING_DEG} deg")

    edges = np.flatnonzero(np.diff(ok.astype(np.int8)))
    starts = [0] + list(edges + 1) if ok[0] else list(edges + 1)
    runs = []
    for s in starts:
        if not ok[s]:
            continue
        nxt = np.flatnonzero(~ok[s:])
        e = s + (int(nxt[0]) - 1 if nxt.size else len(ok) - 1 - s)
        runs.append((s, e))
    if around_ms is None:
        s, e = runs[0]
    else:
        s, e = min(runs, key=lambda se: 0 if grid[se[0]] <= around_ms <= grid[se[1]]
                   else min(abs(grid[se[0]] - around_ms), abs(grid[se[1]] - around_ms)))
    if around_ms is not None and ((s == 0 and lo > ephemeris.start_ms)
                                  or (e == len(grid) - 1 and hi < ephemeris.end_ms)):
        return compute_dto_window(request, ephemeris)

    if s == 0:
        start = int(grid[0])
    else:
        a, b = int(grid[s - 1]), int(grid[s])
        while b - a > 1:
            m = (a + b) // 2
            if _inside(ephemeris, target, m):
                b = m
            else:
                a = m
        start = b
    if e == len(grid) - 1:
        end = int(grid[-1])
    else:
        a, b = int(grid[e]), int(grid[e + 1])
        while b - a > 1:
            m = (a + b) // 2
            if _inside(ephemeris, target, m):
                a = m
            else:
                b = m
        end = a
    return DtoWindow(start, end)


# -- relaying ---------------------------------------------------------------------------

def relay_search(from_attitude: Attitude, t_from_ms: int, request: _Request, ephemeris: Ephemeris,
                 *, not_before_ms: int | None = None, duration_ms: int | None = None) -> int | None:
    """Smallest whole-second relay ``d >= 1`` from a held attitude to ``request``.

    ``d`` qualifies when the slew to the request's start attitude at
    ``t_from_ms + d s`` takes at most ``d`` seconds and the full acquisition
    fits in the DTO window from that instant (and, optionally, the arrival is
    not before ``not_before_ms``). Returns ``None`` when no ``d`` qualifies.
    """
    tau = acquisition_duration(request.median_start, request.median_end) if duration_ms is None else duration_ms
    latest = min(request.dto_end_ms - tau, ephemeris.end_ms)
    earliest = request.dto_start_ms if not_before_ms is None else max(request.dto_start_ms, not_before_ms)
    d = max(1, -((t_from_ms - earliest) // 1000))
    b0 = boresight_from_attitude(from_attitude)
    while t_from_ms + d * 1000 <= latest:
        if d >= 180:
            return d
        t = t_from_ms + d * 1000
        b1 = boresight_lof(ephemeris.state_at(t), request.median_start, t)
        sep = _angle_between(b0, b1)
        if math.ceil(sep / SLEW_RATE_DEG_S - _ANGLE_EPS) <= d:
            return d
        d += max(1, math.floor((sep / SLEW_RATE_DEG_S - d) / (1.0 + MAX_TARGET_DRIFT_DEG_S / SLEW_RATE_DEG_S)))
    return None


def min_relay_time(t_end_ms: int, f1: _Request, f2: _Request, ephemeris: Ephemeris) -> int | None:
    """Minimum relay (s) from the end of ``f1`` at ``t_end_ms`` to the start of ``f2``."""
    att = end_attitude(f1, ephemeris, t_end_ms)
    return relay_search(att, t_end_ms, f2, ephemeris)
