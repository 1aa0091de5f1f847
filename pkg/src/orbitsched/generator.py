"""
Seeded synthetic problem instances.

Satellites fly circular terminator orbits (15 revolutions per day). Requests
are dropped in small geographic hotspots close to each satellite's ground
track so that neighbouring DTO windows overlap and planners face real
contention. Every DTO window is computed with the same visibility geometry
the planners use.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .core import (AcquisitionRequest, EphemerisRecord, ProblemInstance, PhysicalConfig,
                   make_instance)
from .geometry import (EARTH_RADIUS_KM, MU_EARTH_KM3_S2, ORBITAL_PERIOD_S, Ephemeris, GeoPoint,
                       NoOpportunityError, acquisition_duration, compute_dto_window, destination,
                       eci_to_geodetic)

DEFAULT_PRIORITY_MIX = (0.1, 0.2, 0.3, 0.4)
DEFAULT_START_MS = 1_700_000_000_000
INCLINATION_DEG = 97.8
SEMI_MAJOR_AXIS_KM = (MU_EARTH_KM3_S2 * (ORBITAL_PERIOD_S / (2 * math.pi)) ** 2) ** (1.0 / 3.0)


def orbit_records(raan_deg: float, phase_deg: float, start_ms: int, duration_s: int,
                  step_s: int = 10) -> tuple:
    """Sample a circular orbit every ``step_s`` seconds over ``duration_s``."""
    a = SEMI_MAJOR_AXIS_KM
    n = 2 * math.pi / ORBITAL_PERIOD_S
    inc, raan = math.radians(INCLINATION_DEG), math.radians(raan_deg)
    p = np.array([math.cos(raan), math.sin(raan), 0.0])
    q = np.array([-math.sin(raan) * math.cos(inc), math.cos(raan) * math.cos(inc), math.sin(inc)])
    t = np.arange(0, duration_s + 1, step_s, dtype=np.int64)
    u = math.radians(phase_deg) + n * t
    pos = a * (np.cos(u)[:, None] * p + np.sin(u)[:, None] * q)
    vel = a * n * (-np.sin(u)[:, None] * p + np.cos(u)[:, None] * q)
    orbit = np.floor(u / (2 * math.pi)).astype(int)
    return tuple(
        EphemerisRecord(int(o), int(start_ms + 1000 * int(ti)),
                        tuple(float(x) for x in pi), tuple(float(x) for x in vi))
        for o, ti, pi, vi in zip(orbit, t, pos, vel)
    )


def _target(eph: Ephemeris, t_ms: int, cross_km: float) -> GeoPoint:
    st = eph.state_at(t_ms)
    r = np.array(st.position_eci_km)
    h = np.cross(r, np.array(st.velocity_eci_km_s))
    rh, hh = r / np.linalg.norm(r), h / np.linalg.norm(h)
    phi = cross_km / EARTH_RADIUS_KM
    return eci_to_geodetic(math.cos(phi) * rh + math.sin(phi) * hh, t_ms)


def generate_instance(n_satellites: int, n_requests: int,
                      priority_mix: Sequence[float] = DEFAULT_PRIORITY_MIX, seed: int = 0, *,
                      start_ms: int = DEFAULT_START_MS, duration_s: int = 86400,
                      ephemeris_step_s: int = 10, hotspot_size: int = 8,
                      hotspot_spread_s: float = 90.0, max_cross_track_km: float = 450.0,
                      median_km: tuple = (10.0, 50.0), completed_fraction: float = 0.0
                      ) -> ProblemInstance:
    """Build a reproducible instance.

    Requests are split round-robin over satellites and grouped into hotspots
    of about ``hotspot_size`` requests, each centred on a random instant of
    the satellite's ground track with a random cross-track offset.
    """
    if n_satellites < 1:
        raise ValueError("n_satellites must be >= 1")
    if n_requests < 0:
        raise ValueError("n_requests must be >= 0")
    mix = np.asarray(priority_mix, dtype=float)
    if mix.shape != (4,) or (mix < 0).any() or abs(mix.sum() - 1.0) > 1e-9:
        raise ValueError("priority_mix must be 4 non-negative weights summing to 1")
    if duration_s < 1200:
        raise ValueError("duration_s must be >= 1200")

    rng = np.random.default_rng(seed)
    sats, ephs = {}, {}
    for k in range(n_satellites):
        sid = f"SAT{k + 1}"
        sats[sid] = orbit_records(90.0, 360.0 * k / n_satellites, start_ms, duration_s,
                                  ephemeris_step_s)
        ephs[sid] = Ephemeris.from_records(sats[sid])

    margin_s = min(600.0, duration_s / 4)
    requests = []
    for k, sid in enumerate(sats):
        eph = ephs[sid]
        count = len(range(k, n_requests, n_satellites))
        n_hot = math.ceil(count / hotspot_size) if count else 0
        centres = np.sort(rng.uniform(margin_s, duration_s - margin_s, size=n_hot))
        offsets = rng.uniform(-0.6, 0.6, size=n_hot) * max_cross_track_km
        for j in range(count):
            h = j * n_hot // count
            while True:
                t_c = int(start_ms + 1000 * (centres[h] + rng.uniform(-hotspot_spread_s, hotspot_spread_s)))
                cross = float(np.clip(offsets[h] + rng.uniform(-150.0, 150.0),
                                      -max_cross_track_km, max_cross_track_km))
                centre = _target(eph, t_c, cross)
                brg = float(rng.uniform(0.0, 360.0))
                half = float(rng.uniform(*median_km)) / 2.0
                m0 = destination(centre, brg + 180.0, half)
                m1 = destination(centre, brg, half)
                prio = int(rng.choice(4, p=mix)) + 1
                done = bool(rng.random() < completed_fraction)
                probe = AcquisitionRequest("probe", prio, t_c, t_c + 1, m0, m1, sid)
                try:
                    w = compute_dto_window(probe, eph, around_ms=t_c)
                except NoOpportunityError:
                    continue
                if w.end_ms - w.start_ms >= acquisition_duration(m0, m1) + 10_000:
                    break
            requests.append((sid, w, prio, m0, m1, done))

    requests.sort(key=lambda r: (r[1].start_ms, r[0]))
    reqs = [AcquisitionRequest(f"R{i:05d}", prio, w.start_ms, w.end_ms, m0, m1, sid, done)
            for i, (sid, w, prio, m0, m1, done) in enumerate(requests)]
    return make_instance(sats, reqs, PhysicalConfig())
