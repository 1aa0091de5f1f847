"""
Exhaustive reference solver for small cluster models.

Enumerates every ordered subset of requests and every start candidate for
each of them, builds the full 0/1 vector (with ``k`` set exactly on the
consecutive pairs) and checks it against the model rows. Rows are checked
as soon as all of their variables are decided, which prunes the candidate
products without relying on any structural shortcut of the model.
"""

from __future__ import annotations

from typing import List, Set, Tuple

from .model import IlpModel, objective_value, violated_rows
from .solver import Assignment

MAX_REQUESTS = 7
MAX_CANDIDATES = 12


def brute_force_oracle(model: IlpModel) -> Assignment:
    n = len(model.ids)
    if n > MAX_REQUESTS or any(len(g) > MAX_CANDIDATES for g in model.gammas):
        raise ValueError(f"oracle limited to {MAX_REQUESTS} requests x {MAX_CANDIDATES} candidates")
    nv = model.n_vars
    var_rows: List[List[int]] = [[] for _ in range(nv)]
    for ri, r in enumerate(model.rows):
        for i, _ in r.terms:
            var_rows[i].append(ri)
    kinds = model.variables

    values = [0] * nv
    seq: List[Tuple[int, int]] = []
    placed: Set[int] = set()
    best = {"obj": objective_value(model, values), "values": tuple(values)}
    if violated_rows(model, values):
        best["obj"], best["values"] = float("-inf"), None

    def decided(i: int) -> bool:
        kind, a, b = kinds[i]
        if kind == "x":
            return b < len(seq)
        if kind == "y":
            return a in placed
        return a in placed and b in placed

    def check(new_vars) -> bool:
        seen = set()
        for i in new_vars:
            for ri in var_rows[i]:
                if ri in seen:
                    continue
                seen.add(ri)
                row = model.rows[ri]
                if all(decided(j) for j, _ in row.terms) and not row.satisfied(values):
                    return False
        return True

    def leaf():
        obj = objective_value(model, values)
        if obj > best["obj"] and not violated_rows(model, values):
            best["obj"], best["values"] = obj, tuple(values)

    def extend():
        q = len(seq)
        if q >= model.n_slots:
            return
        for f in range(n):
            if f in placed:
                continue
            for a in range(len(model.gammas[f])):
                new = []
                xi = model.index[("x", f, q)]
                values[xi] = 1
                yi = model.index[("y", f, a)]
                values[yi] = 1
                ki = None
                if seq:
                    ki = model.index[("k", seq[-1][0], f)]
                    values[ki] = 1
                seq.append((f, a))
                placed.add(f)
                new.extend(model.index[("x", g, q)] for g in range(n))
                new.extend(model.index[("y", f, aa)] for aa in range(len(model.gammas[f])))
                for g in placed:
                    if g != f:
                        new.append(model.index[("k", g, f)])
                        new.append(model.index[("k", f, g)])
                if check(new):
                    leaf()
                    extend()
                placed.discard(f)
                seq.pop()
                values[xi] = 0
                values[yi] = 0
                if ki is not None:
                    values[ki] = 0

    extend()
    if best["values"] is None:
        raise RuntimeError("model has no feasible assignment")
    return Assignment(best["values"], objective_value(model, best["values"]), True, 0)
