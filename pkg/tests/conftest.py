import functools
import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from orbitsched.core import AcquisitionRequest, make_instance
from orbitsched.generator import DEFAULT_START_MS, generate_instance, orbit_records
from orbitsched.geometry import EARTH_RADIUS_KM, Ephemeris, destination, eci_to_geodetic

settings.register_profile("repo", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")


@functools.lru_cache(maxsize=None)
def tiny_instance(n_sats=1, n_requests=6, seed=0, hotspot_size=6, duration_s=1800):
    """Short-horizon instances that every planner handles in well under a second."""
    return generate_instance(n_sats, n_requests, seed=seed, duration_s=duration_s,
                             hotspot_size=hotspot_size)


@pytest.fixture
def toy():
    return tiny_instance(1, 6, 3)


@pytest.fixture
def two_sat():
    return tiny_instance(2, 12, 4)


# -- hand-built scenarios on one satellite ------------------------------------------------

T0 = DEFAULT_START_MS
SAT_RECORDS = orbit_records(90.0, 0.0, T0, 3000, 10)
SAT_EPH = Ephemeris.from_records(SAT_RECORDS)


def ground_point(t_ms, cross_km=0.0, eph=SAT_EPH):
    """Surface point under the satellite at ``t_ms``, shifted ``cross_km`` across track."""
    s = eph.state_at(t_ms)
    r = np.array(s.position_eci_km)
    h = np.cross(r, np.array(s.velocity_eci_km_s))
    phi = cross_km / EARTH_RADIUS_KM
    return eci_to_geodetic(math.cos(phi) * r / np.linalg.norm(r) + math.sin(phi) * h / np.linalg.norm(h), t_ms)


def make_request(rid, t_ms, window_ms, *, prio=4, cross_km=0.0, length_km=5.0, open_ms=None):
    """Request centred near the ground track at ``t_ms`` with DTO [open, open + window)."""
    p = ground_point(t_ms, cross_km)
    q = destination(p, 0.0, length_km)
    start = t_ms if open_ms is None else open_ms
    return AcquisitionRequest(rid, prio, start, start + window_ms, p, q, "SAT1")


def scenario(requests):
    return make_instance({"SAT1": SAT_RECORDS}, requests)


def oracle_cluster(seed, n=None):
    """Random contended cluster whose model stays within the exhaustive oracle's limits.

    Generated requests share one hotspot; their windows are then cut down to
    short random slices around a common instant so that not all of them fit.
    """
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 7)) if n is None else n
    inst = generate_instance(1, n, seed=seed, duration_s=1800, hotspot_size=n, hotspot_spread_s=20.0)
    t_c = int(np.median([(r.dto_start_ms + r.dto_end_ms) // 2 for r in inst.requests]))
    reqs = []
    for r in inst.requests:
        lo = max(r.dto_start_ms, t_c + int(rng.integers(-20, 20)) * 1000)
        hi = min(r.dto_end_ms, lo + r.duration_ms + int(rng.integers(2, 30)) * 1000)
        if hi - lo < r.duration_ms:
            lo, hi = r.dto_start_ms, r.dto_start_ms + r.duration_ms + 5000
        reqs.append(AcquisitionRequest(r.request_id, r.priority, lo, hi, r.median_start, r.median_end,
                                       r.satellite_id))
    reqs.sort(key=lambda r: (r.priority, r.dto_end_ms, r.request_id))
    span = max(r.dto_end_ms - r.duration_ms - r.dto_start_ms for r in reqs)
    step_s = max(1, math.ceil(span / 11000))
    return reqs, inst.ephemerides["SAT1"], step_s


def trap_requests():
    """Five requests where the first one on offer ("a") costs two others.

    Taking ``a`` leaves 3 completions; skipping it for b and c leaves 4.
    """
    t = T0 + 1_500_000
    a = make_request("a", t, 1, cross_km=150.0, length_km=300.0)
    a = AcquisitionRequest("a", 4, t, t + a.duration_ms + 25_000, a.median_start, a.median_end, "SAT1")
    return [a, make_request("b", t, 22_000, cross_km=-150.0), make_request("c", t, 40_000, cross_km=-140.0),
            make_request("d", t + 600_000, 60_000, cross_km=-50.0),
            make_request("e", t + 900_000, 60_000, cross_km=50.0)]
