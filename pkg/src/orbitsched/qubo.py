"""
QUBO compilation of cluster models and a simulated-annealing solver.

Energy convention: ``E(b) = sum_{i<=j} M[i, j] b_i b_j + offset`` with ``M``
upper triangular, minimised. The objective block is the negated integer
objective; constraints enter as ``beta * C`` with ``C`` built row by row:

- ``<= 1`` rows with unit coefficients: ``(sum v - 1/2)^2`` (floor 1/4);
- rows whose slack range is a single value: ``(sum c v - rhs)^2``;
- two-variable implications ``a <= b``: ``a - a b``;
- any other inequality: ``(sum c v + sum 2^i z_i - rhs)^2`` with slack bits.

Rows pinning a single variable to zero (the no-transition rows) are applied
as a presolve: the variable is fixed and never becomes a QUBO bit.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from sklearn.base import BaseEstimator

from .chaining import place_after
from .clustering import make_clusters, split_clusters
from .core import make_acquisition, make_plan
from .geometry import NADIR
from .ilp.model import IlpModel, build_cluster_model, objective_value, violated_rows

MAX_EXHAUSTIVE_BITS = 22


class QuboError(ValueError):
    pass


@dataclass
class PenaltyBlock:
    row: str
    tag: str
    kind: str  # "half", "square", "implication", "slack"
    floor: float
    slack_bits: Tuple[int, ...] = ()


@dataclass
class QuboModel:
    """Compiled model.

    ``bits[i]`` names bit ``i``: ``("var", model_index)`` for an integer
    variable or ``("slack", row_name, power)`` for a slack bit. ``fixed``
    maps integer variables removed by presolve to their value.
    """
    bits: List[Tuple]
    matrix: np.ndarray
    offset: float
    beta: float
    floor: float
    blocks: List[PenaltyBlock]
    fixed: Dict[int, int]
    n_model_vars: int
    objective_matrix: np.ndarray = field(repr=False, default=None)
    objective_offset: float = 0.0
    infeasible_rows: List[str] = field(default_factory=list)

    @property
    def n_bits(self) -> int:
        return len(self.bits)

    def var_bits(self) -> Dict[int, int]:
        return {b[1]: i for i, b in enumerate(self.bits) if b[0] == "var"}


class _Quad:
    """Accumulates a quadratic polynomial over bits in upper-triangular form."""

    def __init__(self):
        self.terms: Dict[Tuple[int, int], float] = {}
        self.const = 0.0

    def add(self, i, j, c):
        if c == 0:
            return
        key = (i, j) if i <= j else (j, i)
        self.terms[key] = self.terms.get(key, 0.0) + c

    def add_square(self, lin: Sequence[Tuple[int, float]], const: float, scale: float = 1.0):
        """scale * (sum c_i b_i + const)^2, using b^2 = b."""
        self.const += scale * const * const
        for a, (i, ci) in enumerate(lin):
            self.add(i, i, scale * (ci * ci + 2 * ci * const))
            for j, cj in lin[a + 1:]:
                self.add(i, j, scale * 2 * ci * cj)

    def matrix(self, n):
        m = np.zeros((n, n))
        for (i, j), c in self.terms.items():
            m[i, j] += c
        return m


def choose_beta(model: IlpModel) -> float:
    """Penalty weight: one more than the total request weight."""
    return float(sum(model.weights) + 1)


def _to_le(row):
    """Row as (terms, rhs) in <= form; equality rows are returned as-is with sense."""
    if row.sense == ">=":
        return [(i, -c) for i, c in row.terms], -row.rhs
    return list(row.terms), row.rhs


def to_qubo(model: IlpModel, beta: Optional[float] = None) -> QuboModel:
    if beta is None:
        beta = choose_beta(model)
    fixed: Dict[int, int] = {}
    for r in model.rows:
        if r.sense == "==" and len(r.terms) == 1 and r.rhs == 0:
            fixed[r.terms[0][0]] = 0
    bits: List[Tuple] = [("var", i) for i in range(model.n_vars) if i not in fixed]
    bit_of = {b[1]: k for k, b in enumerate(bits)}

    obj = _Quad()
    for i, c in model.objective:
        if i in bit_of:
            obj.add(bit_of[i], bit_of[i], -c)

    pen = _Quad()
    blocks: List[PenaltyBlock] = []
    infeasible: List[str] = []
    for r in model.rows:
        terms = [(i, c) for i, c in r.terms if i not in fixed]
        shift = sum(c * fixed[i] for i, c in r.terms if i in fixed)
        rhs = r.rhs - shift
        if r.sense == "==":
            if not terms:
                if rhs != 0:
                    infeasible.append(r.name)
                continue
            lin = [(bit_of[i], float(c)) for i, c in terms]
            pen.add_square(lin, -float(rhs))
            blocks.append(PenaltyBlock(r.name, r.tag, "square", 0.0))
            continue
        le_terms, le_rhs = _to_le(type(r)(r.tag, r.name, tuple(terms), r.sense, rhs))
        minact = sum(c for _, c in le_terms if c < 0)
        maxact = sum(c for _, c in le_terms if c > 0)
        if maxact <= le_rhs:
            continue  # always satisfied
        max_slack = le_rhs - minact
        if max_slack < 0:
            infeasible.append(r.name)
            continue
        if max_slack == 0:
            pen.add_square([(bit_of[i], float(c)) for i, c in le_terms], -float(le_rhs))
            blocks.append(PenaltyBlock(r.name, r.tag, "square", 0.0))
        elif le_rhs == 1 and all(c == 1 for _, c in le_terms):
            pen.add_square([(bit_of[i], 1.0) for i, _ in le_terms], -0.5)
            blocks.append(PenaltyBlock(r.name, r.tag, "half", 0.25))
        elif len(le_terms) == 2 and le_rhs == 0 and sorted(c for _, c in le_terms) == [-1, 1]:
            a = next(i for i, c in le_terms if c == 1)
            b = next(i for i, c in le_terms if c == -1)
            pen.add(bit_of[a], bit_of[a], 1.0)
            pen.add(bit_of[a], bit_of[b], -1.0)
            blocks.append(PenaltyBlock(r.name, r.tag, "implication", 0.0))
        else:
            width = math.ceil(math.log2(max_slack + 1))
            first = len(bits)
            for p in range(width):
                bits.append(("slack", r.name, p))
            lin = [(bit_of[i], float(c)) for i, c in le_terms]
            lin += [(first + p, float(2 ** p)) for p in range(width)]
            pen.add_square(lin, -float(le_rhs))
            blocks.append(PenaltyBlock(r.name, r.tag, "slack", 0.0, tuple(range(first, first + width))))

    n = len(bits)
    om = obj.matrix(n)
    matrix = om + beta * pen.matrix(n)
    floor = sum(b.floor for b in blocks)
    return QuboModel(bits=bits, matrix=matrix, offset=beta * pen.const + obj.const, beta=float(beta),
                     floor=floor, blocks=blocks, fixed=fixed, n_model_vars=model.n_vars,
                     objective_matrix=om, objective_offset=obj.const, infeasible_rows=infeasible)


def qubo_energy(qubo: QuboModel, bits) -> float:
    b = np.asarray(bits, dtype=float)
    if b.shape != (qubo.n_bits,):
        raise ValueError(f"expected {qubo.n_bits} bits, got shape {b.shape}")
    return float(b @ qubo.matrix @ b + qubo.offset)


def energies(qubo: QuboModel, states: np.ndarray) -> np.ndarray:
    """Energies of many bitstrings, states shape (S, n)."""
    s = np.asarray(states, dtype=float)
    return np.einsum("si,ij,sj->s", s, qubo.matrix, s) + qubo.offset


def penalty_value(qubo: QuboModel, bits) -> float:
    """The constraint part C(b), so that energy = objective part + beta * C."""
    b = np.asarray(bits, dtype=float)
    obj = float(b @ qubo.objective_matrix @ b + qubo.objective_offset)
    return (qubo_energy(qubo, b) - obj) / qubo.beta


def all_states(n: int) -> np.ndarray:
    if n > MAX_EXHAUSTIVE_BITS:
        raise QuboError(f"exhaustive enumeration limited to {MAX_EXHAUSTIVE_BITS} bits")
    idx = np.arange(2 ** n)
    return ((idx[:, None] >> np.arange(n)[None, :]) & 1).astype(np.int8)


def exhaustive_minimum(qubo: QuboModel) -> Tuple[np.ndarray, float]:
    states = all_states(qubo.n_bits)
    e = energies(qubo, states)
    k = int(np.argmin(e))
    return states[k], float(e[k])


def decode(qubo: QuboModel, bits) -> Tuple[int, ...]:
    """Integer-model 0/1 vector from QUBO bits (presolved variables restored)."""
    values = [0] * qubo.n_model_vars
    for i, v in qubo.fixed.items():
        values[i] = v
    for k, b in enumerate(qubo.bits):
        if b[0] == "var":
            values[b[1]] = int(bits[k])
    return tuple(values)


def encode(qubo: QuboModel, values) -> np.ndarray:
    """QUBO bits for an integer assignment with slack bits chosen to minimise the energy."""
    bits = np.zeros(qubo.n_bits, dtype=np.int8)
    for k, b in enumerate(qubo.bits):
        if b[0] == "var":
            bits[k] = values[b[1]]
    for blk in qubo.blocks:
        if not blk.slack_bits:
            continue
        best, best_e = None, None
        for combo in itertools.product((0, 1), repeat=len(blk.slack_bits)):
            bits[list(blk.slack_bits)] = combo
            e = qubo_energy(qubo, bits)
            if best_e is None or e < best_e:
                best, best_e = combo, e
        bits[list(blk.slack_bits)] = best
    return bits


def is_feasible(model: IlpModel, values) -> bool:
    return not violated_rows(model, values)


def anneal(qubo: QuboModel, sweeps: int = 200, t_start: float = 10.0, t_end: float = 1e-3,
           seed: int = 0, restarts: int = 4, initial=None) -> Tuple[np.ndarray, float]:
    """Single-flip Metropolis with a geometric temperature ladder.

    Runs ``restarts`` independent descents from the initial state (all zeros
    by default) and returns the best state seen over all of them.
    """
    if sweeps < 1 or restarts < 1:
        raise ValueError("sweeps and restarts must be >= 1")
    if not t_start >= t_end > 0:
        raise ValueError("need t_start >= t_end > 0")
    n = qubo.n_bits
    rng = np.random.default_rng(seed)
    if n == 0:
        return np.zeros(0, dtype=np.int8), float(qubo.offset)
    M = qubo.matrix
    diag = np.diag(M).copy()
    A = M + M.T
    np.fill_diagonal(A, 0.0)
    start = np.zeros(n) if initial is None else np.asarray(initial, dtype=float)
    best, best_e = start.copy(), float(start @ M @ start + qubo.offset)
    ratio = (t_end / t_start) ** (1.0 / max(1, sweeps - 1))
    for _ in range(restarts):
        b = start.copy()
        field_ = A @ b
        e = float(b @ M @ b + qubo.offset)
        T = t_start
        for _ in range(sweeps):
            order = rng.permutation(n)
            u = rng.random(n)
            for k in range(n):
                i = order[k]
                delta = (1.0 - 2.0 * b[i]) * (diag[i] + field_[i])
                if delta <= 0 or u[k] < math.exp(-delta / T):
                    s = 1.0 - 2.0 * b[i]
                    b[i] += s
                    field_ += s * A[:, i]
                    e += delta
                    if e < best_e - 1e-12:
                        best, best_e = b.copy(), e
            T *= ratio
    best_e = float(best @ M @ best + qubo.offset)
    return best.astype(np.int8), best_e


def export_coo(qubo: QuboModel) -> str:
    """Coordinate-list text: a header with offset and beta, then ``i j coefficient`` lines."""
    lines = [f"# n={qubo.n_bits} offset={float(qubo.offset)!r} beta={float(qubo.beta)!r}"]
    n = qubo.n_bits
    for i in range(n):
        for j in range(i, n):
            c = qubo.matrix[i, j]
            if c != 0:
                lines.append(f"{i} {j} {float(c)!r}")
    return "\n".join(lines) + "\n"


def read_coo(text: str) -> Tuple[np.ndarray, float, float]:
    """Inverse of :func:`export_coo`: (matrix, offset, beta)."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    head = dict(tok.split("=") for tok in lines[0].lstrip("#").split())
    n = int(head["n"])
    m = np.zeros((n, n))
    for ln in lines[1:]:
        i, j, c = ln.split()
        m[int(i), int(j)] = float(c)
    return m, float(head["offset"]), float(head["beta"])


def solve_exact(model: IlpModel):
    """(values, objective) of the exhaustive QUBO minimiser, decoded."""
    q = to_qubo(model)
    bits, _ = exhaustive_minimum(q)
    values = decode(q, bits)
    return values, objective_value(model, values)


# -- planner ---------------------------------------------------------------------------

def slot_proposal(model: IlpModel, values) -> List[Tuple[int, int]]:
    """(request index, start index) pairs read off a possibly infeasible 0/1 vector.

    Requests are ordered by their first occupied slot; a request without a
    selected start uses its earliest candidate.
    """
    first_slot: Dict[int, int] = {}
    for f in range(len(model.ids)):
        for q in range(model.n_slots):
            if values[model.index[("x", f, q)]]:
                first_slot[f] = q
                break
    out = []
    for f in sorted(first_slot, key=lambda f: (first_slot[f], f)):
        alphas = [a for a in range(len(model.gammas[f])) if values[model.index[("y", f, a)]]]
        out.append((f, alphas[0] if alphas else 0))
    return out


class QuboPlanner(BaseEstimator):
    """Per-cluster annealing planner.

    Each cluster model is compiled to a QUBO and annealed; the best
    bitstring's slot order and start choices are then chained from the
    previous cluster's exit state, dropping any request the chain cannot
    hold. Chaining makes the output valid even when annealing ends in an
    infeasible state.
    """

    def __init__(self, cluster="bunch-sort", k=None, max_cluster_size=3, step_s=5,
                 max_candidates=3, sweeps=300, restarts=2, seed=0):
        self.cluster = cluster
        self.k = k
        self.max_cluster_size = max_cluster_size
        self.step_s = step_s
        self.max_candidates = max_candidates
        self.sweeps = sweeps
        self.restarts = restarts
        self.seed = seed

    def _plan_group(self, group, eph, state, seed):
        model = build_cluster_model(group, eph, self.step_s, entry=state,
                                    max_candidates=self.max_candidates)
        q = to_qubo(model)
        bits, energy = anneal(q, sweeps=self.sweeps, restarts=self.restarts, seed=seed)
        values = decode(q, bits)
        feasible = is_feasible(model, values)
        att, t = state
        seq = []
        for f, a in slot_proposal(model, values):
            g = model.grid.entries[f]
            start, _ = place_after(g.request, eph, att, t, g.starts[a])
            if start is None:
                continue
            acq = make_acquisition(g.request, eph, start, att)
            seq.append(acq)
            att, t = acq.end_attitude, acq.end_ms
        report = {"size": len(group), "bits": q.n_bits, "energy": energy, "feasible": feasible}
        return seq, list(model.grid.excluded), report, (att, t)

    def fit(self, instance, y=None):
        by_id = instance.by_id
        seqs, dropped, self.reports_ = {}, [], []
        for sid, eph in instance.ephemerides.items():
            clusters = split_clusters(make_clusters(self.cluster, instance.pending(sid), self.k, self.seed),
                                      self.max_cluster_size)
            state = (NADIR, eph.start_ms)
            seq = []
            for n, c in enumerate(clusters):
                part, lost, rep, state = self._plan_group([by_id[i] for i in c.request_ids], eph, state,
                                                          self.seed + n)
                seq += part
                dropped += lost
                self.reports_.append(rep)
            seqs[sid] = seq
        self.plan_ = make_plan(seqs, instance, dropped)
        return self

    def predict(self, instance):
        return self.fit(instance).plan_
