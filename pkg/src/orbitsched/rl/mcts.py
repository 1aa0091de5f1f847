"""
PUCT tree search over a functional environment.

Values are undiscounted rewards to go. A node's ``W / N`` estimates the
return from its state; the value of taking action ``a`` is the step reward
plus the child's estimate. Each simulation walks down by PUCT, expands one
new child, scores it with the evaluator (or 0 at a terminal state) and
backs the return up the path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Tuple

import numpy as np

# evaluator(state) -> (priors over actions, value estimate)
Evaluator = Callable[[object], Tuple[np.ndarray, float]]


@dataclass
class MctsNode:
    state: object
    terminal: bool
    prior: Optional[np.ndarray] = None
    legal: Optional[np.ndarray] = None
    N: int = 0
    W: float = 0.0
    children: Dict[int, Tuple["MctsNode", float]] = field(default_factory=dict)
    visits_here: int = 0  # simulations that ended at this node (expansion or terminal)

    @property
    def value(self) -> float:
        return self.W / self.N if self.N else 0.0


def _legal(env, state) -> np.ndarray:
    if hasattr(env, "action_mask"):
        return np.asarray(env.action_mask(state), dtype=bool)
    return np.ones(env.n_actions, dtype=bool)


def _is_done(env, state) -> bool:
    if hasattr(state, "done"):
        return bool(state.done)
    return bool(env.done(state))


class _Bounds:
    def __init__(self):
        self.lo, self.hi = math.inf, -math.inf

    def add(self, v: float):
        self.lo = min(self.lo, v)
        self.hi = max(self.hi, v)

    def norm(self, v: float) -> float:
        if self.hi > self.lo:
            return (v - self.lo) / (self.hi - self.lo)
        return 0.5


def _expand(node: MctsNode, env, evaluate: Evaluator) -> float:
    legal = _legal(env, node.state)
    node.legal = legal
    if not legal.any():
        node.terminal = True
        node.prior = np.zeros(len(legal))
        return 0.0
    prior, value = evaluate(node.state)
    p = np.where(legal, np.maximum(np.asarray(prior, dtype=float), 0.0), 0.0)
    s = p.sum()
    node.prior = p / s if s > 0 else legal / legal.sum()
    return float(value)


def mcts_search(root_state, env, evaluate: Evaluator, n_simulations: int, c_puct: float = 1.5,
                seed: int = 0, dirichlet: Optional[Tuple[float, float]] = None,
                return_root: bool = False):
    """Visit-count distribution over actions at ``root_state`` and the root value.

    ``dirichlet=(alpha, eps)`` mixes exploration noise into the root priors.
    A terminal root yields an all-zero distribution and value 0.
    """
    if n_simulations < 1:
        raise ValueError("n_simulations must be >= 1")
    rng = np.random.default_rng(seed)
    root = MctsNode(root_state, _is_done(env, root_state))
    n_actions = env.n_actions
    if root.terminal:
        out = (np.zeros(n_actions), 0.0)
        return out + (root,) if return_root else out
    _expand(root, env, evaluate)
    if root.terminal:
        out = (np.zeros(n_actions), 0.0)
        return out + (root,) if return_root else out
    if dirichlet is not None:
        alpha, eps = dirichlet
        idx = np.flatnonzero(root.legal)
        noise = rng.dirichlet([alpha] * len(idx))
        root.prior = root.prior.copy()
        root.prior[idx] = (1 - eps) * root.prior[idx] + eps * noise
    jitter = rng.random(n_actions) * 1e-9  # deterministic tie-breaking
    bounds = _Bounds()

    for _ in range(n_simulations):
        node = root
        path = [node]
        rewards = []
        while True:
            if node.terminal:
                leaf_value = 0.0
                node.visits_here += 1
                break
            sqrt_n = math.sqrt(max(1, node.N))
            fpu = bounds.norm(node.value)
            best, best_score = None, -math.inf
            for a in np.flatnonzero(node.legal):
                child = node.children.get(int(a))
                if child is None or child[0].N == 0:
                    q, n = fpu, 0
                else:
                    q, n = bounds.norm(child[1] + child[0].value), child[0].N
                score = q + c_puct * node.prior[a] * sqrt_n / (1 + n) + jitter[a]
                if score > best_score:
                    best, best_score = int(a), score
            if best in node.children:
                child, r = node.children[best]
                rewards.append(r)
                node = child
                path.append(node)
                continue
            s2, r, done = env.step(node.state, best)
            child = MctsNode(s2, bool(done))
            node.children[best] = (child, float(r))
            rewards.append(float(r))
            path.append(child)
            leaf_value = 0.0 if child.terminal else _expand(child, env, evaluate)
            child.visits_here += 1
            break
        # back up: the return from path[i] is sum of rewards after it plus the leaf value
        g = leaf_value
        path[-1].N += 1
        path[-1].W += g
        bounds.add(path[-1].value)
        for i in range(len(path) - 2, -1, -1):
            g = rewards[i] + g
            path[i].N += 1
            path[i].W += g
            bounds.add(rewards[i] + path[i + 1].value)

    visits = np.zeros(n_actions)
    for a, (child, _) in root.children.items():
        visits[a] = child.N
    dist = visits / visits.sum()
    out = (dist, root.value)
    return out + (root,) if return_root else out
