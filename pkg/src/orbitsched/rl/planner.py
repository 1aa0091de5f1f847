"""Deploying trained networks as planners."""

from __future__ import annotations

from typing import Optional

import numpy as np
import torch
from sklearn.base import BaseEstimator

from ..core import Plan, ProblemInstance, make_plan
from .checkpoint import load_checkpoint
from .envs import SatEnv, satellite_envs
from .mcts import mcts_search
from .alphazero import make_evaluator
from .nets import NetConfig, PolicyValueNet, make_net


def rollout(env: SatEnv, net: PolicyValueNet, n_simulations: int = 0, c_puct: float = 1.5, seed: int = 0):
    """Final state of an argmax episode; with ``n_simulations`` > 0 each move is chosen by search."""
    s = env.reset()
    evaluate = make_evaluator(net, env) if n_simulations else None
    step = 0
    while not s.done:
        mask = env.action_mask(s)
        if n_simulations:
            dist, _ = mcts_search(s, env, evaluate, n_simulations, c_puct, seed=seed + step)
            a = int(np.argmax(dist))
        else:
            with torch.no_grad():
                logits, _ = net(torch.as_tensor(env.observe(s))[None], torch.as_tensor(mask)[None])
            a = int(torch.argmax(logits[0]))
        s, _, _ = env.step(s, a)
        step += 1
    return s


def plan_with_policy(instance: ProblemInstance, net: PolicyValueNet, *, n_simulations: int = 0,
                     c_puct: float = 1.5, priority_order: bool = True, seed: int = 0) -> Plan:
    """Roll the policy out on every satellite and collect the committed acquisitions.

    Actions are restricted to the environment's feasible set, so every
    emitted sequence chains by construction.
    """
    seqs = {}
    for sid, env in satellite_envs(instance, priority_order=priority_order).items():
        seqs[sid] = rollout(env, net, n_simulations, c_puct, seed).plan
    return make_plan(seqs, instance)


class PolicyPlanner(BaseEstimator):
    """Planner around a policy network (PPO or AlphaZero).

    Without a checkpoint an untrained network seeded by ``seed`` is used;
    its plans are valid but poor.
    """

    def __init__(self, checkpoint: Optional[str] = None, policy="hybrid", n_simulations=0,
                 c_puct=1.5, priority_order=True, seed=0):
        self.checkpoint = checkpoint
        self.policy = policy
        self.n_simulations = n_simulations
        self.c_puct = c_puct
        self.priority_order = priority_order
        self.seed = seed

    def _net(self) -> PolicyValueNet:
        if self.checkpoint:
            return load_checkpoint(self.checkpoint)[0]
        return make_net(NetConfig(policy=self.policy), self.seed)

    def fit(self, instance: ProblemInstance, y=None):
        self.net_ = self._net()
        self.plan_ = plan_with_policy(instance, self.net_, n_simulations=self.n_simulations,
                                      c_puct=self.c_puct, priority_order=self.priority_order,
                                      seed=self.seed)
        return self

    def predict(self, instance: ProblemInstance) -> Plan:
        return self.fit(instance).plan_
