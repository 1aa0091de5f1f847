"""
Exact depth-first branch-and-bound for 0-1 models with +/-1 coefficients.

Rows are kept in ``<=`` form with an incrementally maintained minimum
activity; when a row's slack drops below one, every free variable in it is
forced. Branching visits the slot variables ``x[f, q]`` slot by slot, trying
high-weight requests first. Two pruning rules keep the tree small:

- bound: objective fixed so far plus the best weights that still fit in the
  open slots (minus each request's cheapest remaining start penalty);
- dominance: two partial queues with the same request set, last request and
  last start have identical completions, so only the better one is expanded.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

from .model import IlpModel, objective_value, violated_rows

_PRUNE_TOL = 1e-10


@dataclass(frozen=True)
class Assignment:
    values: Tuple[int, ...]
    objective: float
    proven: bool = True
    nodes: int = 0

    def ones(self, model: IlpModel, kind: str):
        return [model.variables[i] for i, v in enumerate(self.values) if v and model.variables[i][0] == kind]


class _Infeasible(Exception):
    pass


class _Search:
    def __init__(self, model: IlpModel, deadline: Optional[float]):
        self.m = model
        self.deadline = deadline
        n = model.n_vars
        self.val = [-1] * n
        # <= rows
        self.row_terms: List[List[Tuple[int, int]]] = []
        self.rhs: List[int] = []
        for r in model.rows:
            if r.sense in ("<=", "=="):
                self.row_terms.append(list(r.terms))
                self.rhs.append(r.rhs)
            if r.sense in (">=", "=="):
                self.row_terms.append([(i, -c) for i, c in r.terms])
                self.rhs.append(-r.rhs)
        self.minact = [sum(c for _, c in t if c < 0) for t in self.row_terms]
        self.var_rows: List[List[Tuple[int, int]]] = [[] for _ in range(n)]
        for ri, t in enumerate(self.row_terms):
            for i, c in t:
                self.var_rows[i].append((ri, c))
        self.obj = [0.0] * n
        for i, c in model.objective:
            self.obj[i] = c
        self.trail: List[int] = []
        self.fixed_obj = 0.0
        self.nodes = 0
        self.timed_out = False
        nreq = len(model.ids)
        self.nreq, self.Q = nreq, model.n_slots
        self.x = [[model.index[("x", f, q)] for q in range(self.Q)] for f in range(nreq)]
        self.y = [[model.index[("y", f, a)] for a in range(len(model.gammas[f]))] for f in range(nreq)]
        # gamma-sorted y indices per request for the bound
        self.y_by_gamma = [sorted(range(len(g)), key=lambda a: g[a]) for g in model.gammas]
        self.order = sorted(range(nreq), key=lambda f: (-model.weights[f], model.grid.entries[f].starts[0], f))
        self.best_values = tuple(0 for _ in range(n))
        self.best_obj = objective_value(model, self.best_values)
        self.memo: Dict[Tuple, float] = {}

    # -- assignment with propagation --------------------------------------------
    def _assign(self, i: int, v: int, queue: List[int]):
        cur = self.val[i]
        if cur != -1:
            if cur != v:
                raise _Infeasible
            return
        self.val[i] = v
        self.trail.append(i)
        if v:
            self.fixed_obj += self.obj[i]
        for ri, c in self.var_rows[i]:
            if (c > 0 and v == 1) or (c < 0 and v == 0):
                self.minact[ri] += abs(c)
            if self.minact[ri] > self.rhs[ri]:
                raise _Infeasible
            queue.append(ri)

    def fix(self, i: int, v: int) -> bool:
        queue: List[int] = []
        try:
            self._assign(i, v, queue)
            while queue:
                ri = queue.pop()
                if self.rhs[ri] - self.minact[ri] >= 1:
                    continue
                for j, c in self.row_terms[ri]:
                    if self.val[j] == -1:
                        self._assign(j, 0 if c > 0 else 1, queue)
            return True
        except _Infeasible:
            return False

    def undo(self, mark: int):
        while len(self.trail) > mark:
            i = self.trail.pop()
            v = self.val[i]
            if v:
                self.fixed_obj -= self.obj[i]
            for ri, c in self.var_rows[i]:
                if (c > 0 and v == 1) or (c < 0 and v == 0):
                    self.minact[ri] -= abs(c)
            self.val[i] = -1

    # -- bound -------------------------------------------------------------------
    def bound(self) -> float:
        open_slots = 0
        for q in range(self.Q):
            col = [self.val[self.x[f][q]] for f in range(self.nreq)]
            if 1 not in col and -1 in col:
                open_slots += 1
        gains = []
        for f in range(self.nreq):
            xs = [self.val[i] for i in self.x[f]]
            if 1 in xs:
                continue
            if -1 not in xs:
                continue
            g = None
            for a in self.y_by_gamma[f]:
                if self.val[self.y[f][a]] != 0:
                    g = self.m.gammas[f][a]
                    break
            if g is None:
                continue
            gains.append(self.m.weights[f] - g)
        gains.sort(reverse=True)
        return self.fixed_obj + sum(v for v in gains[:open_slots] if v > 0)

    # -- search --------------------------------------------------------------------
    def _record(self):
        values = tuple(1 if v == 1 else 0 for v in self.val)
        obj = objective_value(self.m, values)
        if obj > self.best_obj:
            self.best_obj, self.best_values = obj, values

    def _complete_rest(self):
        """All slots decided: fix the remaining free variables, zeros first."""
        free = [i for i, v in enumerate(self.val) if v == -1]
        if not free:
            self._record()
            return
        i = free[0]
        for v in (0, 1):
            mark = len(self.trail)
            if self.fix(i, v):
                self._complete_rest()
            self.undo(mark)

    def _state_key(self, q: int):
        placed, last, last_a = [], None, None
        for f in range(self.nreq):
            if any(self.val[i] == 1 for i in self.x[f]):
                placed.append(f)
            if self.val[self.x[f][q]] == 1:
                last = f
                ys = [a for a, i in enumerate(self.y[f]) if self.val[i] == 1]
                last_a = ys[0] if len(ys) == 1 else None
        if last is None or last_a is None:
            return None
        return (q, frozenset(placed), last, last_a)

    def slot(self, q: int):
        self.nodes += 1
        if self.deadline is not None and self.nodes % 64 == 0 and time.monotonic() > self.deadline:
            self.timed_out = True
        if self.timed_out:
            return
        if q >= self.Q:
            self._complete_rest()
            return
        if self.bound() < self.best_obj + _PRUNE_TOL:
            return
        base = len(self.trail)
        tried_zero = []
        for f in self.order:
            i = self.x[f][q]
            if self.val[i] == 0:
                continue
            mark = len(self.trail)
            if self.fix(i, 1):
                key = self._state_key(q)
                prev = self.memo.get(key) if key is not None else None
                if prev is None or self.fixed_obj > prev + _PRUNE_TOL:
                    if key is not None:
                        self.memo[key] = self.fixed_obj
                    self.slot(q + 1)
            self.undo(mark)
            # the remaining branches exclude f from slot q
            if not self.fix(i, 0):
                self.undo(base)
                return
            tried_zero.append(i)
            if self.timed_out:
                break
        if not self.timed_out and all(self.val[self.x[f][q]] != 1 for f in range(self.nreq)):
            # empty slot: every later slot is empty too
            mark = len(self.trail)
            ok = True
            for f in range(self.nreq):
                for qq in range(q, self.Q):
                    if self.val[self.x[f][qq]] == -1 and not self.fix(self.x[f][qq], 0):
                        ok = False
                        break
                if not ok:
                    break
            if ok:
                self._complete_rest()
            self.undo(mark)
        self.undo(base)


def solve_bb(model: IlpModel, time_limit_s: Optional[float] = None) -> Assignment:
    """Optimal assignment of ``model`` (maximisation).

    With a time limit the best assignment found so far is returned and
    flagged ``proven=False`` if the tree was not exhausted.
    """
    deadline = None if time_limit_s is None else time.monotonic() + time_limit_s
    s = _Search(model, deadline)
    if model.n_vars:
        s.slot(0)
    values = s.best_values
    bad = violated_rows(model, values)
    if bad:
        raise RuntimeError(f"solver produced an assignment violating {bad[0].name}")
    return Assignment(values, objective_value(model, values), not s.timed_out, s.nodes)
