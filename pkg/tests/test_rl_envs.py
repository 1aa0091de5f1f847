import numpy as np
import pytest
from hypothesis import given, strategies as st

from orbitsched.core import make_plan, validate_plan
from orbitsched.geometry import NADIR, maneuver_duration, start_attitude
from orbitsched.rl.envs import OBS_SIZE, ReqEnv, SatEnv, satellite_envs

from conftest import SAT_EPH, T0, make_request, tiny_instance

T = T0 + 1_500_000


def _slot(state, env, rid):
    for k, i in enumerate(state.view):
        if env.requests[i].request_id == rid:
            return k
    return None


def _empty_slot(state):
    return len(state.view)


def trap():
    """Request a is legal first but blocks b and c, which chain together."""
    a = make_request("a", T, 1, length_km=300.0)
    a = type(a)("a", 4, T, T + a.duration_ms + 5_000, a.median_start, a.median_end, "SAT1")
    b = make_request("b", T + 10_000, 4_000, open_ms=T + 10_000, cross_km=20.0)
    c = make_request("c", T + 25_000, 4_000, open_ms=T + 25_000, cross_km=-20.0)
    return [a, b, c]


# -- satellite-centred environment ----------------------------------------------------------

def test_single_feasible_request():
    r = make_request("x", T, 60_000)
    env = SatEnv([r], SAT_EPH)
    s = env.reset()
    assert s.legal == (True,)
    s, reward, done = env.step(s, 0)
    assert reward == 1.0 and done
    assert [a.request_id for a in s.plan] == ["x"]


def test_masked_slot_costs_one_second():
    env = SatEnv([make_request("x", T, 60_000), make_request("y", T + 5_000, 60_000)], SAT_EPH)
    s = env.reset()
    s2, reward, done = env.step(s, _empty_slot(s))
    assert reward == 0.0 and not done
    assert s2.t_ms == s.t_ms + 1000 and s2.plan == ()


def test_completed_request_leaves_the_view():
    env = SatEnv([make_request("x", T, 60_000), make_request("y", T + 200_000, 60_000)], SAT_EPH)
    s = env.reset()
    s, _, _ = env.step(s, _slot(s, env, "x"))
    assert [env.requests[i].request_id for i in s.view] == ["y"]
    s2, reward, _ = env.step(s, 1)
    assert reward == 0.0


def test_out_of_range_action():
    env = SatEnv([make_request("x", T, 60_000)], SAT_EPH)
    with pytest.raises(ValueError):
        env.step(env.reset(), 100)


def test_following_the_oracle_plan_reaches_the_optimum():
    # exhaustive oracle for this trap: b then c (2); a alone blocks both
    env = SatEnv(trap(), SAT_EPH, priority_order=False)
    s, total = env.reset(), 0.0
    assert [env.requests[i].request_id for i, ok in zip(s.view, s.legal) if ok] == ["a"]
    for rid in ["b", "c"]:
        while True:
            k = _slot(s, env, rid)
            if k is not None and s.legal[k]:
                break
            s, r, _ = env.step(s, _empty_slot(s))
            total += r
        s, r, _ = env.step(s, k)
        total += r
    assert total == 2
    greedy = env.step(env.reset(), _slot(env.reset(), env, "a"))[0]
    while not greedy.done:
        greedy = env.step(greedy, _empty_slot(greedy))[0]
    assert greedy.reward_so_far == 1


def test_priority_order_allows_only_the_top_tier():
    reqs = [make_request("lo", T, 60_000, prio=3), make_request("hi", T, 60_000, prio=1, cross_km=10.0)]
    strict = SatEnv(reqs, SAT_EPH).reset()
    loose = SatEnv(reqs, SAT_EPH, priority_order=False).reset()
    assert sum(strict.legal) == 1 and sum(loose.legal) == 2


def test_observation_layout():
    inst = tiny_instance(1, 6, 3)
    env = SatEnv(inst.requests, inst.ephemerides["SAT1"])
    s = env.reset()
    obs = env.observe(s)
    assert obs.shape == (OBS_SIZE,) == (1003,)
    slots = obs[:1000].reshape(100, 10)
    assert (slots[len(s.view):, 8] == 1).all()
    assert (slots[:len(s.view), 9] == np.array(s.legal, dtype=float)).all()
    assert np.isfinite(obs).all()


@given(st.integers(0, 30), st.integers(0, 2 ** 31), st.booleans())
def test_episodes_terminate_and_match_their_plan(seed, action_seed, strict):
    inst = tiny_instance(1, 8, seed, 8, 1800)
    env = SatEnv(inst.requests, inst.ephemerides["SAT1"], priority_order=strict)
    rng = np.random.default_rng(action_seed)
    s, total = env.reset(), 0.0
    for _ in range(5000):
        if s.done:
            break
        legal = np.flatnonzero(env.action_mask(s))
        a = int(rng.choice(legal)) if rng.random() < 0.9 else int(rng.integers(100))
        s2, r, _ = env.step(s, a)
        assert s2.t_ms > s.t_ms
        assert r in (0.0, 1.0)
        total += r
        s = s2
    assert s.done
    assert total == len(s.plan) <= len(inst.requests)
    plan = make_plan({"SAT1": s.plan}, inst)
    assert validate_plan(plan, inst).ok
    assert sum(st_.completed for st_ in plan.stats.values()) == total


def test_max_steps_truncates():
    inst = tiny_instance(1, 8, 2, 8, 1800)
    env = SatEnv(inst.requests, inst.ephemerides["SAT1"], max_steps=3)
    s = env.reset()
    for _ in range(3):
        s, _, done = env.step(s, 99)
    assert done


def test_satellite_envs_skip_idle_satellites(two_sat):
    envs = satellite_envs(two_sat)
    assert set(envs) == {sid for sid in two_sat.ephemerides if two_sat.pending(sid)}


# -- request-centred environment --------------------------------------------------------------

def _two_sats():
    return {"S1": SAT_EPH, "S2": SAT_EPH}


def test_idle_satellite_beats_busy_one():
    r = make_request("x", T, 60_000, cross_km=100.0)
    env = ReqEnv([r], _two_sats())
    s = env.reset()
    busy = type(s)(0, (s.sat_time[0], r.dto_end_ms), s.sat_attitude, ())
    # independent execution-time arithmetic on the idle satellite
    t = r.dto_start_ms
    slew = maneuver_duration(NADIR, start_attitude(r, SAT_EPH, t))
    assert env.execution(busy, 0, r) == (t + slew * 1000, t + slew * 1000 + r.duration_ms)
    assert env.step(busy, 0)[1] == 1.0
    assert env.step(busy, 1)[1] == 0.0


def test_no_satellite_fits():
    r = make_request("x", T, 60_000)
    env = ReqEnv([r], _two_sats())
    s = env.reset()
    late = type(s)(0, (r.dto_end_ms, r.dto_end_ms), s.sat_attitude, ())
    assert [env.step(late, a)[1] for a in (0, 1)] == [0.0, 0.0]


def test_done_after_every_request():
    inst = tiny_instance(2, 7, 5, 7, 1800)
    env = ReqEnv(inst.requests, inst.ephemerides)
    s, done, n = env.reset(), False, 0
    while not done:
        assert env.observe(s).shape == (env.obs_size,)
        s, _, done = env.step(s, n % 2)
        n += 1
    assert n == 7 and env.done(s)
    assert env.step(s, 0) == (s, 0.0, True)


def test_req_env_rejects_bad_satellite():
    env = ReqEnv([make_request("x", T, 60_000)], _two_sats())
    with pytest.raises(ValueError):
        env.step(env.reset(), 2)


def test_req_env_assignments_do_not_overlap():
    inst = tiny_instance(2, 12, 8, 12, 1800)
    env = ReqEnv(inst.requests, inst.ephemerides)
    s, done = env.reset(), False
    while not done:
        s, _, done = env.step(s, 0)
    windows = sorted((start, start + inst.by_id[rid].duration_ms) for rid, sat, start in s.assigned if sat == 0)
    assert all(a[1] <= b[0] for a, b in zip(windows, windows[1:]))
    for rid, _, start in s.assigned:
        r = inst.by_id[rid]
        assert r.dto_start_ms <= start and start + r.duration_ms <= r.dto_end_ms
