"""
Integer model of one cluster.

Binary variables
    x[f, q]   request f occupies queue slot q
    y[f, a]   request f starts at its candidate time b[f][a]
    k[f1, f2] f2 is acquired right after f1

Rows are tagged by constraint family (``one_slot``, ``transition``, ...);
every coefficient is +1 or -1 and every right-hand side an integer.
The objective is ``sum J_f x_fq - sum gamma_fa y_fa`` (maximised).
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from ..chaining import earliest_start
from ..core import AcquisitionRequest
from ..geometry import (NADIR, Attitude, Ephemeris, end_attitude, maneuver_duration,
                        relay_search, start_attitude)

TAGS = tuple(f"eq{i}" for i in range(7, 20))


@dataclass(frozen=True)
class RequestGrid:
    request: AcquisitionRequest
    starts: Tuple[int, ...]
    start_attitudes: Tuple[Attitude, ...]
    end_attitudes: Tuple[Attitude, ...]


@dataclass(frozen=True)
class AngleGrid:
    """Candidate start times per request, in cluster order."""
    entries: Tuple[RequestGrid, ...]
    excluded: Tuple[str, ...]
    step_s: int
    entry_state: Tuple[Attitude, int]

    @property
    def ids(self) -> Tuple[str, ...]:
        return tuple(e.request.request_id for e in self.entries)

    def __len__(self):
        return len(self.entries)


@dataclass(frozen=True)
class TransitionTable:
    """``maps[(i1, i2)][a1] = a2``: start a1 of request i1 leads to start a2 of i2."""
    maps: Dict[Tuple[int, int], Dict[int, int]]

    @property
    def pairs(self):
        return sorted(self.maps)

    def __contains__(self, pair):
        return pair in self.maps


@dataclass(frozen=True)
class Row:
    tag: str
    name: str
    terms: Tuple[Tuple[int, int], ...]
    sense: str
    rhs: int

    def satisfied(self, values) -> bool:
        act = sum(c for i, c in self.terms if values[i])
        if self.sense == "<=":
            return act <= self.rhs
        if self.sense == ">=":
            return act >= self.rhs
        return act == self.rhs


@dataclass(frozen=True)
class IlpModel:
    ids: Tuple[str, ...]
    priorities: Tuple[int, ...]
    weights: Tuple[int, ...]
    gammas: Tuple[Tuple[float, ...], ...]
    n_slots: int
    variables: Tuple[Tuple, ...]
    rows: Tuple[Row, ...]
    objective: Tuple[Tuple[int, float], ...]
    grid: AngleGrid
    transitions: TransitionTable
    index: Dict[Tuple, int] = field(repr=False, default_factory=dict)

    @property
    def n_vars(self) -> int:
        return len(self.variables)

    def var(self, *key) -> int:
        return self.index[key]

    def rows_by_tag(self, tag: str) -> List[Row]:
        return [r for r in self.rows if r.tag == tag]


def _fits(req, eph, att, t_from, start):
    if start < req.dto_start_ms or start + req.duration_ms > req.dto_end_ms:
        return False
    return maneuver_duration(att, start_attitude(req, eph, start)) * 1000 <= start - t_from


def thin(starts: Sequence[int], max_candidates: Optional[int]) -> List[int]:
    """Keep at most ``max_candidates`` evenly spread starts, always including the first."""
    if not max_candidates or len(starts) <= max_candidates:
        return list(starts)
    if max_candidates == 1:
        return [starts[0]]
    idx = sorted({round(i * (len(starts) - 1) / (max_candidates - 1)) for i in range(max_candidates)})
    return [starts[i] for i in idx]


def build_angle_grid(requests: Sequence[AcquisitionRequest], ephemeris: Ephemeris, step_s: int = 5,
                     *, entry: Optional[Tuple[Attitude, int]] = None,
                     max_candidates: Optional[int] = None) -> AngleGrid:
    """Candidate starts every ``step_s`` seconds over each request's trimmed window.

    The window opens at the earliest start reachable from ``entry`` (the
    attitude/time left by the previous cluster, nadir at the ephemeris start
    by default). Candidates that the entry relay cannot reach are skipped;
    requests with no candidate are excluded. ``max_candidates`` thins each
    list evenly.
    """
    if step_s < 1:
        raise ValueError("step_s must be >= 1")
    att, t0 = entry if entry is not None else (NADIR, ephemeris.start_ms)
    entries, excluded = [], []
    for r in requests:
        first = earliest_start(r, ephemeris, att, t0)
        if first is None:
            excluded.append(r.request_id)
            continue
        last = r.dto_end_ms - r.duration_ms
        starts = [b for b in range(first, last + 1, step_s * 1000)
                  if b == first or _fits(r, ephemeris, att, t0, b)]
        starts = thin(starts, max_candidates)
        entries.append(RequestGrid(
            r, tuple(starts),
            tuple(start_attitude(r, ephemeris, b) for b in starts),
            tuple(end_attitude(r, ephemeris, b + r.duration_ms) for b in starts),
        ))
    return AngleGrid(tuple(entries), tuple(excluded), int(step_s), (att, t0))


def build_transitions(grid: AngleGrid, ephemeris: Ephemeris) -> TransitionTable:
    """Map each start of f1 to the first start of f2 reachable after ``t_min``.

    The arrival ``b1 + tau1 + t_min`` is snapped up to the next candidate of
    f2 at which the slew from f1's end attitude also fits in the gap.
    """
    maps: Dict[Tuple[int, int], Dict[int, int]] = {}
    for i1, g1 in enumerate(grid.entries):
        r1 = g1.request
        for i2, g2 in enumerate(grid.entries):
            if i1 == i2:
                continue
            r2 = g2.request
            m = {}
            for a1, b1 in enumerate(g1.starts):
                t_end = b1 + r1.duration_ms
                if t_end + 1000 > g2.starts[-1]:
                    break
                d = relay_search(g1.end_attitudes[a1], t_end, r2, ephemeris,
                                 duration_ms=r2.duration_ms)
                if d is None:
                    continue
                arrival = t_end + d * 1000
                a2 = bisect.bisect_left(g2.starts, arrival)
                while a2 < len(g2.starts):
                    gap = g2.starts[a2] - t_end
                    if maneuver_duration(g1.end_attitudes[a1], g2.start_attitudes[a2]) * 1000 <= gap:
                        m[a1] = a2
                        break
                    a2 += 1
            if m:
                maps[(i1, i2)] = m
    return TransitionTable(maps)


def priority_weights(priorities: Sequence[int]) -> List[int]:
    """J = 1 for the lowest priority present; each higher level is 1 + sum of all lower weights."""
    levels = sorted(set(priorities), reverse=True)
    weight, below = {}, 0
    for p in levels:
        weight[p] = 1 + below
        below += weight[p] * sum(1 for x in priorities if x == p)
    return [weight[p] for p in priorities]


def build_model(grid: AngleGrid, transitions: TransitionTable) -> IlpModel:
    reqs = [e.request for e in grid.entries]
    n = len(reqs)
    Q = n
    J = priority_weights([r.priority for r in reqs])
    gammas = []
    for e in grid.entries:
        r = e.request
        span = (r.dto_end_ms - r.dto_start_ms - r.duration_ms) / 1000.0
        gammas.append(tuple(0.0 if span <= 0 else ((b - r.dto_start_ms) / 1000.0) / (Q * span)
                            for b in e.starts))

    variables: List[Tuple] = []
    for f in range(n):
        for q in range(Q):
            variables.append(("x", f, q))
    for f in range(n):
        for a in range(len(grid.entries[f].starts)):
            variables.append(("y", f, a))
    for f1 in range(n):
        for f2 in range(n):
            if f1 != f2:
                variables.append(("k", f1, f2))
    index = {v: i for i, v in enumerate(variables)}
    X = lambda f, q: index[("x", f, q)]  # noqa: E731
    Y = lambda f, a: index[("y", f, a)]  # noqa: E731
    K = lambda f1, f2: index[("k", f1, f2)]  # noqa: E731
    n_alpha = [len(e.starts) for e in grid.entries]

    rows: List[Row] = []
    add = lambda tag, name, terms, sense, rhs: rows.append(Row(tag, name, tuple(terms), sense, rhs))  # noqa: E731
    for f in range(n):
        add("one_slot", f"one_slot_f{f}", [(X(f, q), 1) for q in range(Q)], "<=", 1)
    for q in range(Q):
        add("slot_capacity", f"slot_capacity_q{q}", [(X(f, q), 1) for f in range(n)], "<=", 1)
    for f in range(n):
        add("start_link", f"start_link_f{f}", [(Y(f, a), 1) for a in range(n_alpha[f])]
            + [(X(f, q), -1) for q in range(Q)], "==", 0)
    for q in range(1, Q):
        add("contiguous", f"contiguous_q{q}", [(X(f, q - 1), 1) for f in range(n)]
            + [(X(f, q), -1) for f in range(n)], ">=", 0)
    for f1 in range(n):
        for f2 in range(n):
            if f1 == f2:
                continue
            for q in range(1, Q):
                add("succ_link", f"succ_link_f{f1}_f{f2}_q{q}",
                    [(K(f1, f2), 1), (X(f1, q - 1), -1), (X(f2, q), -1)], ">=", -1)
    for f2 in range(n):
        add("one_pred", f"one_pred_f{f2}", [(K(f1, f2), 1) for f1 in range(n) if f1 != f2], "<=", 1)
    for f1 in range(n):
        add("one_succ", f"one_succ_f{f1}", [(K(f1, f2), 1) for f2 in range(n) if f2 != f1], "<=", 1)
    for f1 in range(n):
        for f2 in range(n):
            if f1 == f2:
                continue
            add("succ_not_first", f"succ_not_first_f{f1}_f{f2}", [(K(f1, f2), 1)] + [(X(f2, q), -1) for q in range(1, Q)],
                "<=", 0)
            add("pred_not_last", f"pred_not_last_f{f1}_f{f2}", [(K(f1, f2), 1)] + [(X(f1, q), -1) for q in range(Q - 1)],
                "<=", 0)
    for (f1, f2), m in sorted(transitions.maps.items()):
        for a1, a2 in sorted(m.items()):
            add("transition", f"transition_f{f1}_f{f2}_a{a1}",
                [(Y(f2, a2), 1), (K(f1, f2), -1), (Y(f1, a1), -1)], ">=", -1)
    for (f1, f2), m in sorted(transitions.maps.items()):
        add("transition_source", f"transition_source_f{f1}_f{f2}", [(Y(f1, a1), 1) for a1 in sorted(m)] + [(K(f1, f2), -1)],
            ">=", 0)
    for f1 in range(n):
        for f2 in range(n):
            if f1 != f2 and (f1, f2) not in transitions.maps:
                add("no_transition", f"no_transition_f{f1}_f{f2}", [(K(f1, f2), 1)], "==", 0)
    for f in range(n):
        add("first_earliest", f"first_earliest_f{f}", [(Y(f, 0), 1), (X(f, 0), -1)], ">=", 0)

    objective = [(X(f, q), float(J[f])) for f in range(n) for q in range(Q)]
    objective += [(Y(f, a), -gammas[f][a]) for f in range(n) for a in range(n_alpha[f])]
    return IlpModel(
        ids=tuple(r.request_id for r in reqs), priorities=tuple(r.priority for r in reqs),
        weights=tuple(J), gammas=tuple(gammas), n_slots=Q, variables=tuple(variables),
        rows=tuple(rows), objective=tuple(objective), grid=grid, transitions=transitions,
        index=index,
    )


def build_cluster_model(requests: Sequence[AcquisitionRequest], ephemeris: Ephemeris,
                        step_s: int = 5, *, entry=None, max_candidates=None) -> IlpModel:
    grid = build_angle_grid(requests, ephemeris, step_s, entry=entry, max_candidates=max_candidates)
    return build_model(grid, build_transitions(grid, ephemeris))


def objective_value(model: IlpModel, values) -> float:
    """Exactly rounded objective of a 0/1 vector (terms summed in variable order)."""
    return math.fsum(c for i, c in model.objective if values[i])


def violated_rows(model: IlpModel, values) -> List[Row]:
    return [r for r in model.rows if not r.satisfied(values)]


def _fmt_term(c, name):
    return f"+ {name}" if c > 0 else f"- {name}"


def var_name(v: Tuple) -> str:
    return f"{v[0]}_{v[1]}_{v[2]}"


def dump_lp(model: IlpModel) -> str:
    """Text listing in LP style: objective, tagged rows, binaries."""
    lines = ["\\ cluster model: " + " ".join(model.ids), "Maximize"]
    obj = " ".join(f"{'+' if c >= 0 else '-'} {abs(c)!r} {var_name(model.variables[i])}"
                   for i, c in model.objective)
    lines.append(f" obj: {obj}" if obj else " obj: 0")
    lines.append("Subject To")
    for r in model.rows:
        lhs = " ".join(_fmt_term(c, var_name(model.variables[i])) for i, c in r.terms) or "0"
        lines.append(f" {r.name}: {lhs} {r.sense} {r.rhs}")
    lines.append("Binaries")
    lines.extend(f" {var_name(v)}" for v in model.variables)
    lines.append("End")
    return "\n".join(lines) + "\n"
