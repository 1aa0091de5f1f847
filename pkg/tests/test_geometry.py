import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from orbitsched.core import AcquisitionRequest
from orbitsched.generator import DEFAULT_START_MS, orbit_records
from orbitsched.geometry import (
    EARTH_RADIUS_KM, GROUND_SPEED_KM_S, NADIR, Attitude, Ephemeris, GeoPoint, NoOpportunityError,
    OutOfSpanError, acquisition_duration, angular_separation, attitude_pointing, boresight_from_attitude,
    boresight_lof, compute_dto_window, depointing_angle, destination, eci_to_geodetic, end_attitude,
    geodetic_to_eci, interpolate_state, maneuver_duration, min_relay_time, relay_search, start_attitude,
)

from conftest import tiny_instance

T0 = DEFAULT_START_MS
lat = st.floats(-90, 90)
lon = st.floats(-180, 180)
angles = st.floats(-80, 80)


@pytest.fixture(scope="module")
def eph():
    return Ephemeris.from_records(orbit_records(90.0, 0.0, T0, 6000, 10))


def _cross_track_target(eph, t, km):
    st_ = eph.state_at(t)
    r = np.array(st_.position_eci_km)
    h = np.cross(r, np.array(st_.velocity_eci_km_s))
    phi = km / EARTH_RADIUS_KM
    u = math.cos(phi) * r / np.linalg.norm(r) + math.sin(phi) * h / np.linalg.norm(h)
    return eci_to_geodetic(u, t)


def _req(rid, m0, m1, start, end, prio=4):
    return AcquisitionRequest(rid, prio, start, end, m0, m1, "S1")


def _oracle_boresight(att):
    r, p = math.radians(att.roll_deg), math.radians(att.pitch_deg)
    rx = np.array([[1, 0, 0], [0, math.cos(-r), -math.sin(-r)], [0, math.sin(-r), math.cos(-r)]])
    ry = np.array([[math.cos(p), 0, math.sin(p)], [0, 1, 0], [-math.sin(p), 0, math.cos(p)]])
    return ry @ rx @ np.array([0.0, 0.0, 1.0])


def _haversine_km(a, b):
    p1, p2 = np.radians([a.latitude_deg, b.latitude_deg])
    dl = np.radians(b.longitude_deg - a.longitude_deg)
    h = np.sin((p2 - p1) / 2) ** 2 + np.cos(p1) * np.cos(p2) * np.sin(dl / 2) ** 2
    return 2 * EARTH_RADIUS_KM * np.arcsin(np.sqrt(h))


# -- frames ------------------------------------------------------------------------------

def test_eci_alignment_at_reference_epoch():
    assert np.allclose(geodetic_to_eci(GeoPoint(0, 0), 0), (EARTH_RADIUS_KM, 0, 0), atol=1e-9)


@pytest.mark.parametrize("lon_deg", [-120.0, 0.0, 77.0])
def test_pole_is_rotation_invariant(lon_deg):
    for t in (0, 12_345_678, T0):
        assert np.allclose(geodetic_to_eci(GeoPoint(90, lon_deg), t), (0, 0, EARTH_RADIUS_KM), atol=1e-9)


def test_eci_matches_spherical_oracle():
    got = geodetic_to_eci(GeoPoint(45, 45), 0)
    want = EARTH_RADIUS_KM * np.array([0.5, 0.5, math.sqrt(0.5)])
    assert np.max(np.abs(np.array(got) - want)) < 1e-9


@given(lat, lon, st.integers(0, 10 ** 13))
def test_eci_norm_is_earth_radius(la, lo, t):
    assert abs(np.linalg.norm(geodetic_to_eci(GeoPoint(la, lo), t)) - EARTH_RADIUS_KM) < 1e-9


@given(st.floats(-89, 89), st.floats(-179, 179), st.integers(0, 10 ** 13))
def test_geodetic_round_trip(la, lo, t):
    back = eci_to_geodetic(geodetic_to_eci(GeoPoint(la, lo), t), t)
    assert abs(back.latitude_deg - la) < 1e-9
    assert abs((back.longitude_deg - lo + 180) % 360 - 180) < 1e-8


# -- interpolation -------------------------------------------------------------------------

def test_interpolation_hits_records_and_midpoints(eph):
    t = eph.timestamps_ms[7]
    assert interpolate_state(eph, t).position_eci_km == eph.positions[7]
    mid = interpolate_state(eph, t + 5000)
    want = (np.array(eph.positions[7]) + np.array(eph.positions[8])) / 2
    assert np.allclose(mid.position_eci_km, want, atol=1e-9)


def test_interpolation_error_against_withheld_records():
    dense = orbit_records(30.0, 10.0, T0, 3000, 1)
    sparse = Ephemeris.from_records(dense[::10])
    errs = [np.linalg.norm(np.subtract(interpolate_state(sparse, r.timestamp_ms).position_eci_km,
                                       r.position_eci_km))
            for r in dense if r.timestamp_ms <= sparse.end_ms]
    assert max(errs) < 1.0


def test_out_of_span(eph):
    with pytest.raises(OutOfSpanError):
        eph.state_at(eph.end_ms + 1)


# -- attitudes ----------------------------------------------------------------------------

def test_nadir_target_gives_zero_angles(eph):
    t = T0 + 1_234_000
    s = eph.state_at(t)
    att = attitude_pointing(s, eci_to_geodetic(s.position_eci_km, t), t)
    assert abs(att.roll_deg) < 1e-6 and abs(att.pitch_deg) < 1e-6


def test_cross_track_target_is_pure_roll(eph):
    t = T0 + 2_000_000
    s = eph.state_at(t)
    target = _cross_track_target(eph, t, 200.0)
    att = attitude_pointing(s, target, t)
    assert abs(att.pitch_deg) < 1e-6
    assert abs(abs(att.roll_deg) - depointing_angle(s, target, t)) < 1e-6


@given(st.integers(0, 5900), st.floats(-600, 600), st.floats(-600, 600))
def test_boresight_reconstruction(eph, dt, along, cross):
    t = T0 + dt * 1000
    target = destination(_cross_track_target(eph, t, cross), 0.0, along)
    b = np.array(boresight_lof(eph.state_at(t), target, t))
    back = np.array(boresight_from_attitude(attitude_pointing(eph.state_at(t), target, t)))
    assert np.max(np.abs(b - back)) < 1e-9


def test_separation_simple_cases():
    a = Attitude(12.0, -7.0)
    assert angular_separation(a, a) == 0.0
    assert abs(angular_separation(Attitude(0, 0), Attitude(0, 90)) - 90.0) < 1e-12
    assert abs(angular_separation(Attitude(0, 0), Attitude(90, 0)) - 90.0) < 1e-12


def test_separation_matches_dot_product_oracle():
    rng = np.random.default_rng(0)
    for _ in range(500):
        a1, a2 = Attitude(*rng.uniform(-80, 80, 2)), Attitude(*rng.uniform(-80, 80, 2))
        b1, b2 = _oracle_boresight(a1), _oracle_boresight(a2)
        want = math.degrees(math.acos(np.clip(b1 @ b2, -1, 1)))
        if want > 1e-2:
            assert abs(angular_separation(a1, a2) - want) < 1e-9


def test_maneuver_rounding():
    assert maneuver_duration(NADIR, NADIR) == 0
    assert maneuver_duration(Attitude(0, 0), Attitude(90, 0)) == 90
    assert maneuver_duration(Attitude(0, 0), Attitude(30.2, 0)) == 31


@given(angles, angles, angles, angles)
def test_maneuver_is_symmetric(r1, p1, r2, p2):
    a, b = Attitude(r1, p1), Attitude(r2, p2)
    assert maneuver_duration(a, b) == maneuver_duration(b, a)


# -- acquisition durations ----------------------------------------------------------------

def test_duration_floor_and_construction():
    p = GeoPoint(10.0, 20.0)
    assert acquisition_duration(p, p) == 1000
    assert acquisition_duration(p, destination(p, 33.0, 10 * GROUND_SPEED_KM_S)) == 10000


@given(st.floats(-70, 70), st.floats(-170, 170), st.floats(0, 360), st.floats(0, 200))
def test_duration_matches_haversine(la, lo, brg, km):
    a = GeoPoint(la, lo)
    b = destination(a, brg, km)
    want = max(1000.0, _haversine_km(a, b) / GROUND_SPEED_KM_S * 1000)
    assert abs(acquisition_duration(a, b) - want) <= 1.0


# -- DTO windows --------------------------------------------------------------------------

def test_window_centred_on_ground_track(eph):
    t_apex = T0 + 3_000_000
    p = eci_to_geodetic(eph.state_at(t_apex).position_eci_km, t_apex)
    w = compute_dto_window(_req("g", p, p, T0, T0 + 1), eph)
    assert abs((w.start_ms + w.end_ms) / 2 - t_apex) <= 2000


def test_window_on_far_side_has_no_opportunity():
    eph = Ephemeris.from_records(orbit_records(90.0, 0.0, T0, 1200, 10))
    t = T0 + 600_000
    sub = eci_to_geodetic(eph.state_at(t).position_eci_km, t)
    far = GeoPoint(-sub.latitude_deg, sub.longitude_deg + 180.0 if sub.longitude_deg < 0 else sub.longitude_deg - 180)
    with pytest.raises(NoOpportunityError):
        compute_dto_window(_req("far", far, far, T0, T0 + 1), eph)


def test_window_edges_sit_at_depointing_limit():
    inst = tiny_instance(2, 40, 11, 8, 7200)
    for r in inst.requests:
        eph = inst.ephemerides[r.satellite_id]
        w = compute_dto_window(r, eph, around_ms=(r.dto_start_ms + r.dto_end_ms) // 2)
        assert (w.start_ms, w.end_ms) == (r.dto_start_ms, r.dto_end_ms)
        centre = GeoPoint(*_mid(r))
        for t in (w.start_ms, w.end_ms):
            assert abs(depointing_angle(eph.state_at(t), centre, t) - 45.0) < 0.01
        for t in np.linspace(w.start_ms, w.end_ms, 25).astype(int):
            assert depointing_angle(eph.state_at(int(t)), centre, int(t)) <= 45.0 + 1e-9


def _mid(r):
    from orbitsched.geometry import midpoint
    m = midpoint(r.median_start, r.median_end)
    return m.latitude_deg, m.longitude_deg


# -- relays -------------------------------------------------------------------------------

def test_relay_to_the_same_target_takes_one_second(eph):
    t = T0 + 3_000_000
    p = _cross_track_target(eph, t, 100.0)
    q = destination(p, 0.0, 20.0)
    f1 = _req("f1", p, q, t - 100_000, t + 200_000)
    f2 = _req("f2", q, destination(q, 0.0, 20.0), t - 100_000, t + 200_000)
    assert min_relay_time(t + f1.duration_ms, f1, f2, eph) == 1


def test_relay_bounded_by_separation(eph):
    t = T0 + 3_000_000
    a, b = _cross_track_target(eph, t, -160.0), _cross_track_target(eph, t, 160.0)
    f1 = _req("f1", a, a, t - 200_000, t + 200_000)
    f2 = _req("f2", b, b, t - 200_000, t + 200_000)
    t_end = t + f1.duration_ms
    sep0 = angular_separation(end_attitude(f1, eph, t_end), start_attitude(f2, eph, t_end))
    assert sep0 > 29.0
    d = min_relay_time(t_end, f1, f2, eph)
    meet = t_end + d * 1000
    sep = angular_separation(end_attitude(f1, eph, t_end), start_attitude(f2, eph, meet))
    assert d >= math.ceil(sep - 1e-9)
    assert d >= 25
    # one second less never works
    sep_before = angular_separation(end_attitude(f1, eph, t_end), start_attitude(f2, eph, meet - 1000))
    assert math.ceil(sep_before - 1e-9) > d - 1


def test_relay_infeasible_when_window_closes(eph):
    t = T0 + 3_000_000
    p = _cross_track_target(eph, t, 0.0)
    f1 = _req("f1", p, p, t - 50_000, t + 50_000)
    f2 = _req("f2", p, p, t - 50_000, t + f1.duration_ms + 500)
    assert min_relay_time(t + f1.duration_ms, f1, f2, eph) is None


def test_relay_triangle_inequality():
    inst = tiny_instance(1, 12, 21, 12, 3600)
    eph = inst.ephemerides["SAT1"]
    reqs = sorted(inst.requests, key=lambda r: r.dto_start_ms)
    wide = [AcquisitionRequest(r.request_id, r.priority, eph.start_ms, eph.end_ms, r.median_start,
                               r.median_end, r.satellite_id) for r in reqs]
    t = (reqs[0].dto_start_ms + reqs[0].dto_end_ms) // 2
    checked = 0
    for i, f1 in enumerate(wide[:4]):
        for f2 in wide[4:8]:
            for f3 in wide[8:]:
                d13 = min_relay_time(t, f1, f3, eph)
                d12 = min_relay_time(t, f1, f2, eph)
                if d12 is None:
                    continue
                t2 = t + d12 * 1000
                d23 = relay_search(start_attitude(f2, eph, t2), t2, f3, eph)
                if d23 is None or d13 is None:
                    continue
                assert d13 <= d12 + d23 + 2
                checked += 1
    assert checked > 10
