"""
Reinforcement-learning environments.

``SatEnv`` views one satellite's request stream: at each step the agent
picks one of the 100 visible requests (the nearest incomplete ones by DTO
opening). A feasible pick is committed after the shortest relay and earns 1;
anything else earns 0 and costs one second. The relay may begin as soon as
the previous acquisition ended, so waiting never wastes slew time. When no visible request can be
started the clock skips forward to the next DTO opening, which is what a run
of forced zero-reward steps would do anyway.

``ReqEnv`` views the problem from the requests' side: requests arrive in DTO
order and the agent chooses which satellite takes each one.

Both environments are functional: states are immutable and ``step`` returns
a new state, which lets tree search branch freely.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..chaining import earliest_start
from ..core import AcquisitionRequest, ChainedAcquisition, ProblemInstance, make_acquisition
from ..geometry import (MAX_DEPOINTING_DEG, NADIR, Attitude, Ephemeris, GeoPoint, depointing_angle,
                        end_attitude, maneuver_duration, start_attitude)

N_SLOTS = 100
N_FEATURES = 10
N_GLOBALS = 3
OBS_SIZE = N_SLOTS * N_FEATURES + N_GLOBALS

FEATURE_NAMES = (
    "dto_start_rel", "dto_end_rel", "start_lat", "start_lon", "end_lat", "end_lon",
    "priority", "duration", "completed", "feasible",
)
DURATION_SCALE_S = 60.0


def priority_scalar(p: int) -> float:
    """1.0 for the highest priority down to 0.25 for the lowest."""
    return (5 - p) / 4.0


@dataclass(frozen=True)
class SatState:
    t_ms: int
    attitude: Attitude
    completed: frozenset
    last_point: Optional[GeoPoint]
    steps: int
    plan: Tuple[ChainedAcquisition, ...]
    view: Tuple[int, ...] = field(default=(), compare=False)
    starts: Tuple[Optional[int], ...] = field(default=(), compare=False)
    legal: Tuple[bool, ...] = field(default=(), compare=False)
    done: bool = False
    free_ms: Optional[int] = None  # when the satellite last finished; slews may start from here

    @property
    def reward_so_far(self) -> int:
        return len(self.plan)


class SatEnv:
    """Satellite-centred environment over one satellite's requests.

    Parameters
    ----------
    requests : sequence of AcquisitionRequest
    ephemeris : Ephemeris
    n_slots : int
        Visible requests per observation (the observation size assumes 100).
    priority_order : bool
        Only the highest priority among the startable requests counts as
        feasible, so lower priorities are taken only when no higher one can be.
    max_steps : int or None
        Episode truncation.
    initial : (Attitude, int) or None
        Starting attitude and time, nadir at the ephemeris start by default.
    """

    def __init__(self, requests: Sequence[AcquisitionRequest], ephemeris: Ephemeris, *,
                 n_slots: int = N_SLOTS, priority_order: bool = True, max_steps: Optional[int] = None,
                 initial: Optional[Tuple[Attitude, int]] = None):
        self.requests = tuple(sorted(requests, key=lambda r: (r.dto_start_ms, r.request_id)))
        self.ephemeris = ephemeris
        self.n_slots = n_slots
        self.priority_order = priority_order
        self.max_steps = max_steps
        self.initial = initial if initial is not None else (NADIR, ephemeris.start_ms)
        self.latest = tuple(r.dto_end_ms - r.duration_ms for r in self.requests)
        self.t0 = self.initial[1]
        end = max((r.dto_end_ms for r in self.requests), default=self.t0 + 1000)
        self.horizon_ms = max(1000, end - self.t0)
        self._static = np.zeros((len(self.requests), N_FEATURES - 4))
        for i, r in enumerate(self.requests):
            self._static[i] = (r.median_start.latitude_deg / 90.0, r.median_start.longitude_deg / 180.0,
                               r.median_end.latitude_deg / 90.0, r.median_end.longitude_deg / 180.0,
                               priority_scalar(r.priority), r.duration_ms / 1000.0 / DURATION_SCALE_S)

    @property
    def n_actions(self) -> int:
        return self.n_slots

    @property
    def obs_size(self) -> int:
        return self.n_slots * N_FEATURES + N_GLOBALS

    # -- state construction -------------------------------------------------------------
    def _alive(self, completed, t) -> List[int]:
        return [i for i in range(len(self.requests))
                if i not in completed and self.latest[i] >= t + 1000]

    def _build(self, t, att, completed, last, steps, plan, free=None) -> SatState:
        free = t if free is None else free
        truncated = self.max_steps is not None and steps >= self.max_steps
        while True:
            alive = self._alive(completed, t)
            view = tuple(alive[:self.n_slots])
            starts = []
            for i in view:
                r = self.requests[i]
                starts.append(earliest_start(r, self.ephemeris, att, free, not_before=t)
                              if r.dto_start_ms <= t else None)
            feasible = [s is not None for s in starts]
            if any(feasible) or truncated or not alive:
                break
            later = [self.requests[i].dto_start_ms for i in alive if self.requests[i].dto_start_ms > t]
            if not later:
                alive = []
                break
            t = t + -((t - min(later)) // 1000) * 1000
        if not alive:
            view, starts, feasible = (), [], []
        if self.priority_order and any(feasible):
            top = min(self.requests[i].priority for i, ok in zip(view, feasible) if ok)
            legal = tuple(ok and self.requests[i].priority == top for i, ok in zip(view, feasible))
        else:
            legal = tuple(feasible)
        done = truncated or not any(legal)
        return SatState(t, att, frozenset(completed), last, steps, tuple(plan), view,
                        tuple(s if ok else None for s, ok in zip(starts, legal)), legal, done, free)

    def reset(self) -> SatState:
        att, t = self.initial
        return self._build(t, att, frozenset(), None, 0, ())

    def step(self, state: SatState, action: int) -> Tuple[SatState, float, bool]:
        if not 0 <= int(action) < self.n_slots:
            raise ValueError(f"action {action} outside [0, {self.n_slots})")
        if state.done:
            return state, 0.0, True
        a = int(action)
        if a < len(state.view) and state.legal[a]:
            i = state.view[a]
            r = self.requests[i]
            acq = make_acquisition(r, self.ephemeris, state.starts[a], state.attitude)
            nxt = self._build(acq.end_ms, acq.end_attitude, state.completed | {i}, r.median_start,
                              state.steps + 1, state.plan + (acq,))
            return nxt, 1.0, nxt.done
        nxt = self._build(state.t_ms + 1000, state.attitude, state.completed, state.last_point,
                          state.steps + 1, state.plan, state.free_ms)
        return nxt, 0.0, nxt.done

    # -- views ---------------------------------------------------------------------------
    def action_mask(self, state: SatState) -> np.ndarray:
        m = np.zeros(self.n_slots, dtype=bool)
        m[:len(state.legal)] = state.legal
        return m

    def remaining(self, state: SatState) -> int:
        """Requests that could still be completed (an upper bound on the reward to go)."""
        return len(self._alive(state.completed, state.t_ms))

    def observe(self, state: SatState) -> np.ndarray:
        obs = np.zeros(self.obs_size, dtype=np.float32)
        slots = obs[:self.n_slots * N_FEATURES].reshape(self.n_slots, N_FEATURES)
        slots[:, 8] = 1.0  # empty slots read as completed
        H = float(self.horizon_ms)
        for k, i in enumerate(state.view):
            r = self.requests[i]
            slots[k, 0] = (r.dto_start_ms - state.t_ms) / H
            slots[k, 1] = (r.dto_end_ms - state.t_ms) / H
            slots[k, 2:8] = self._static[i]
            slots[k, 8] = 0.0
            slots[k, 9] = 1.0 if state.legal[k] else 0.0
        g = obs[self.n_slots * N_FEATURES:]
        g[0] = (state.t_ms - self.t0) / H
        if state.last_point is not None:
            g[1] = state.last_point.latitude_deg / 90.0
            g[2] = state.last_point.longitude_deg / 180.0
        return obs

    def request_of(self, state: SatState, action: int) -> Optional[AcquisitionRequest]:
        return self.requests[state.view[action]] if action < len(state.view) else None


def satellite_envs(instance: ProblemInstance, **kwargs) -> Dict[str, SatEnv]:
    """One environment per satellite over its pending requests."""
    return {sid: SatEnv(instance.pending(sid), eph, **kwargs)
            for sid, eph in instance.ephemerides.items() if instance.pending(sid)}


# -- request-centred environment ---------------------------------------------------------

N_OPTIONS = 5


@dataclass(frozen=True)
class ReqState:
    index: int
    sat_time: Tuple[int, ...]
    sat_attitude: Tuple[Attitude, ...]
    assigned: Tuple[Tuple[str, int, int], ...]

    @property
    def reward_so_far(self) -> int:
        return len(self.assigned)


class ReqEnv:
    """Request-centred environment: one decision (a satellite index) per request.

    A satellite can take the request when its execution time, the satellite
    timestamp plus the maneuver plus the acquisition, fits before the DTO
    end and the target is within the depointing limit when the slew ends.
    Requests are visited in DTO-opening order; the window is the request's
    own DTO.
    """

    def __init__(self, requests: Sequence[AcquisitionRequest], ephemerides: Dict[str, Ephemeris],
                 n_options: int = N_OPTIONS):
        self.requests = tuple(sorted(requests, key=lambda r: (r.dto_start_ms, r.request_id)))
        self.sat_ids = tuple(sorted(ephemerides))
        self.ephemerides = [ephemerides[s] for s in self.sat_ids]
        self.n_options = n_options
        self.t0 = min(e.start_ms for e in self.ephemerides)
        end = max((r.dto_end_ms for r in self.requests), default=self.t0 + 1000)
        self.horizon_ms = max(1000, end - self.t0)

    @property
    def n_actions(self) -> int:
        return len(self.sat_ids)

    @property
    def obs_size(self) -> int:
        return N_FEATURES + len(self.sat_ids) * (3 * self.n_options + 1)

    def reset(self) -> ReqState:
        return ReqState(0, tuple(e.start_ms for e in self.ephemerides),
                        tuple(NADIR for _ in self.ephemerides), ())

    def done(self, state: ReqState) -> bool:
        return state.index >= len(self.requests)

    def execution(self, state: ReqState, sat: int, request: AcquisitionRequest):
        """(start_ms, end_ms) of the request on satellite ``sat``, or None when it does not fit."""
        eph = self.ephemerides[sat]
        t = max(state.sat_time[sat], request.dto_start_ms)
        if t > eph.end_ms:
            return None
        slew = maneuver_duration(state.sat_attitude[sat], start_attitude(request, eph, t))
        start = t + slew * 1000
        end = start + request.duration_ms
        if end > request.dto_end_ms or end > eph.end_ms:
            return None
        if depointing_angle(eph.state_at(start), request.median_start, start) > MAX_DEPOINTING_DEG:
            return None
        return start, end

    def step(self, state: ReqState, action: int) -> Tuple[ReqState, float, bool]:
        if not 0 <= int(action) < len(self.sat_ids):
            raise ValueError(f"satellite index {action} outside [0, {len(self.sat_ids)})")
        if self.done(state):
            return state, 0.0, True
        r = self.requests[state.index]
        ex = self.execution(state, int(action), r)
        if ex is None:
            nxt = ReqState(state.index + 1, state.sat_time, state.sat_attitude, state.assigned)
            return nxt, 0.0, self.done(nxt)
        s = int(action)
        times = list(state.sat_time)
        atts = list(state.sat_attitude)
        times[s] = ex[1]
        atts[s] = end_attitude(r, self.ephemerides[s], ex[1])
        nxt = ReqState(state.index + 1, tuple(times), tuple(atts),
                       state.assigned + ((r.request_id, s, ex[0]),))
        return nxt, 1.0, self.done(nxt)

    def observe(self, state: ReqState) -> np.ndarray:
        obs = np.zeros(self.obs_size, dtype=np.float32)
        if self.done(state):
            return obs
        H = float(self.horizon_ms)
        r = self.requests[state.index]
        now = min(state.sat_time)
        obs[:N_FEATURES] = ((r.dto_start_ms - now) / H, (r.dto_end_ms - now) / H,
                            r.median_start.latitude_deg / 90.0, r.median_start.longitude_deg / 180.0,
                            r.median_end.latitude_deg / 90.0, r.median_end.longitude_deg / 180.0,
                            priority_scalar(r.priority), r.duration_ms / 1000.0 / DURATION_SCALE_S, 0.0, 1.0)
        pos = N_FEATURES
        upcoming = self.requests[state.index + 1:]
        for s in range(len(self.sat_ids)):
            ts = state.sat_time[s]
            near = sorted(upcoming, key=lambda q: (abs(q.dto_start_ms - ts), q.request_id))[:self.n_options]
            for k in range(self.n_options):
                if k < len(near):
                    q = near[k]
                    obs[pos:pos + 3] = ((q.dto_start_ms - ts) / H, (q.dto_end_ms - ts) / H,
                                        priority_scalar(q.priority))
                pos += 3
            ex = self.execution(state, s, r)
            obs[pos] = 1.0 if ex is None else (ex[1] - now) / H
            pos += 1
        return obs
