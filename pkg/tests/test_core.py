import json
import math

import pytest
from hypothesis import given, strategies as st

from orbitsched.chaining import chain
from orbitsched.core import (
    AcquisitionRequest, ChainedAcquisition, DataError, ParseError, Plan, ProblemInstance, load_instance,
    make_plan, parse_ephemeris, parse_requests, plan_to_json, read_plan, validate_plan, write_instance,
    write_plan,
)
from orbitsched.generator import generate_instance
from orbitsched.geometry import GeoPoint, compute_dto_window, min_relay_time
from orbitsched.greedy import GreedyPlanner

from conftest import tiny_instance

REC = {"satellite_id": "S1", "orbit_number": 0, "timestamp_ms": 1000,
       "position_km": [7000.0, 0.0, 0.0], "velocity_km_s": [0.0, 7.5, 0.0]}
REQ = {"request_id": "A", "priority": 1, "dto_start_ms": 1000, "dto_end_ms": 5000,
       "median_start": {"lat": 1.0, "lon": 2.0}, "median_end": {"lat": 1.1, "lon": 2.0},
       "satellite_id": "S1", "completed": False}


def _dump(tmp_path, name, obj):
    p = tmp_path / name
    p.write_text(json.dumps(obj))
    return p


@pytest.fixture(scope="module")
def big():
    return generate_instance(2, 2000, seed=42)


# -- parsing ---------------------------------------------------------------------------

def test_two_record_ephemeris(tmp_path):
    later = dict(REC, timestamp_ms=11000)
    out = parse_ephemeris(_dump(tmp_path, "e.json", [REC, later]))
    assert list(out) == ["S1"]
    assert [r.timestamp_ms for r in out["S1"]] == [1000, 11000]


def test_decreasing_timestamps_rejected(tmp_path):
    earlier = dict(REC, timestamp_ms=500)
    with pytest.raises(DataError):
        parse_ephemeris(_dump(tmp_path, "e.json", [REC, earlier]))


@pytest.mark.parametrize("bad", [
    {"position_km": [7000.0, 0.0]},
    {"timestamp_ms": "soon"},
    {"satellite_id": 3},
])
def test_malformed_ephemeris_is_a_parse_error(tmp_path, bad):
    with pytest.raises(ParseError):
        parse_ephemeris(_dump(tmp_path, "e.json", [dict(REC, **bad)]))


def test_position_outside_leo_rejected(tmp_path):
    with pytest.raises(DataError):
        parse_ephemeris(_dump(tmp_path, "e.json", [dict(REC, position_km=[40000.0, 0.0, 0.0])]))


def test_single_request(tmp_path):
    reqs = parse_requests(_dump(tmp_path, "r.json", [REQ]))
    assert len(reqs) == 1 and reqs[0].priority == 1


def test_priority_five_rejected(tmp_path):
    with pytest.raises(DataError):
        parse_requests(_dump(tmp_path, "r.json", [dict(REQ, priority=5)]))


def test_broken_json(tmp_path):
    p = tmp_path / "r.json"
    p.write_text("[{")
    with pytest.raises(ParseError):
        parse_requests(p)


def test_completed_defaults_false(tmp_path):
    req = {k: v for k, v in REQ.items() if k != "completed"}
    assert parse_requests(_dump(tmp_path, "r.json", [req]))[0].completed is False


def test_fifteen_orbits_round_trip_bytes(tmp_path):
    inst = generate_instance(1, 30, seed=1, duration_s=86400)
    assert max(r.orbit_number for r in inst.satellites["SAT1"]) >= 14
    ep, rp = write_instance(inst, tmp_path / "a")
    back = load_instance(tmp_path / "a")
    ep2, rp2 = write_instance(back, tmp_path / "b")
    assert open(ep, "rb").read() == open(ep2, "rb").read()
    assert open(rp, "rb").read() == open(rp2, "rb").read()


def test_large_request_file_round_trips(tmp_path, big):
    _, rp = write_instance(big, tmp_path)
    assert tuple(parse_requests(rp)) == big.requests


# -- generator ---------------------------------------------------------------------------

def test_zero_requests():
    inst = generate_instance(1, 0, seed=5, duration_s=1200)
    assert list(inst.satellites) == ["SAT1"] and inst.requests == ()


def test_generator_is_deterministic(big):
    again = generate_instance(2, 2000, seed=42)
    assert again.requests == big.requests and again.satellites == big.satellites


def test_generated_windows_are_real(big):
    for r in big.requests:
        recs = big.satellites[r.satellite_id]
        assert recs[0].timestamp_ms <= r.dto_start_ms < r.dto_end_ms <= recs[-1].timestamp_ms
        assert r.dto_end_ms - r.dto_start_ms >= r.duration_ms


def test_generated_windows_match_geometry():
    inst = tiny_instance(2, 20, 9, 5, 7200)
    for r in inst.requests:
        eph = inst.ephemerides[r.satellite_id]
        w = compute_dto_window(r, eph, around_ms=r.dto_start_ms)
        assert (w.start_ms, w.end_ms) == (r.dto_start_ms, r.dto_end_ms)


def test_bad_generator_arguments():
    with pytest.raises(ValueError):
        generate_instance(0, 10)
    with pytest.raises(ValueError):
        generate_instance(1, 10, priority_mix=(1, 1, 1, 1))


# -- validation --------------------------------------------------------------------------

def test_empty_plan_is_valid(toy):
    assert validate_plan(make_plan({}, toy), toy).ok


def _one_acq(inst):
    r = inst.requests[0]
    eph = inst.ephemerides[r.satellite_id]
    acq = chain([(r, r.dto_start_ms)], eph)[0]
    return r, eph, acq


def test_start_before_dto(toy):
    r, _, acq = _one_acq(toy)
    early = ChainedAcquisition(r.request_id, r.dto_start_ms - 1000, acq.acquisition_duration_ms,
                               acq.relay_duration_s, acq.start_attitude, acq.end_attitude)
    report = validate_plan(make_plan({r.satellite_id: [early]}, toy), toy)
    assert "dto_containment" in {v.rule_id for v in report.violations}


def test_duplicate_request_never_validates(toy):
    r, _, acq = _one_acq(toy)
    report = validate_plan(make_plan({r.satellite_id: [acq, acq]}, toy), toy)
    assert not report.ok
    assert "duplicate_request" in {v.rule_id for v in report.violations}


def test_unknown_request(toy):
    r, _, acq = _one_acq(toy)
    ghost = ChainedAcquisition("nope", *[getattr(acq, f) for f in (
        "acquisition_start_ms", "acquisition_duration_ms", "relay_duration_s", "start_attitude", "end_attitude")])
    report = validate_plan(Plan({r.satellite_id: (ghost,)}), toy)
    assert [v.rule_id for v in report.violations] == ["unknown_request"]


@pytest.mark.parametrize("seed", range(6))
def test_valid_plans_satisfy_chaining_identity(seed):
    inst = tiny_instance(2, 14, seed, 7, 2400)
    plan = GreedyPlanner(cluster="none").predict(inst)
    assert validate_plan(plan, inst).ok
    by_id = inst.by_id
    for sid, seq in plan.satellites.items():
        eph = inst.ephemerides[sid]
        for a, b in zip(seq, seq[1:]):
            tmin = min_relay_time(a.end_ms, by_id[a.request_id], by_id[b.request_id], eph)
            assert tmin is not None
            assert b.acquisition_start_ms >= a.acquisition_start_ms + a.acquisition_duration_ms + tmin * 1000


def test_completed_requests_are_excluded():
    inst = generate_instance(1, 20, seed=2, duration_s=3600, completed_fraction=0.5)
    done = {r.request_id for r in inst.requests if r.completed}
    assert done
    plan = GreedyPlanner(cluster="none").predict(inst)
    assert not done & set(plan.completed_ids())
    assert sum(s.total for s in plan.stats.values()) == len(inst.requests) - len(done)


# -- plan files --------------------------------------------------------------------------

def test_plan_round_trip(tmp_path, two_sat):
    plan = GreedyPlanner().predict(two_sat)
    write_plan(plan, tmp_path / "p.json")
    back = read_plan(tmp_path / "p.json")
    assert back.satellites == plan.satellites
    assert plan_to_json(back) == plan_to_json(plan)
    data = json.loads((tmp_path / "p.json").read_text())
    assert set(data["stats"]) == {"p1", "p2", "p3", "p4"}


@given(st.lists(st.sampled_from([1, 2, 3, 4]), max_size=20), st.data())
def test_stats_count_completions(prios, data):
    reqs = [AcquisitionRequest(f"r{i}", p, 0, 10, GeoPoint(0, 0), GeoPoint(0, 0), "S")
            for i, p in enumerate(prios)]
    inst = ProblemInstance({"S": ()}, tuple(reqs))
    done = data.draw(st.sets(st.sampled_from([r.request_id for r in reqs]))) if reqs else set()
    fake = {"S": [ChainedAcquisition(i, 0, 1, 0, (0, 0, 0), (0, 0, 0)) for i in sorted(done)]}
    plan = make_plan(fake, inst)
    for p in (1, 2, 3, 4):
        s = plan.stats[p]
        assert s.total == prios.count(p)
        assert s.completed == sum(1 for r in reqs if r.priority == p and r.request_id in done)
        assert s.rate is None if s.total == 0 else math.isclose(s.rate, s.completed / s.total)
