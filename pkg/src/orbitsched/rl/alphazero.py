"""
AlphaZero-style training: tree-search self-play plus policy/value regression.

Value targets are rewards to go divided by the number of requests still
completable in that state, so they lie in [0, 1]; the evaluator scales the
network's value back up before handing it to the search.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
import torch

from .mcts import mcts_search
from .nets import NetConfig, PolicyValueNet, make_net
from .ppo import TrainingDiverged, _envs


@dataclass
class AzConfig:
    iterations: int = 10
    episodes_per_iter: int = 4
    n_simulations: int = 16
    c_puct: float = 1.5
    temperature: float = 1.0
    dirichlet_alpha: float = 0.3
    dirichlet_eps: float = 0.25
    train_steps: int = 10
    batch_size: int = 64
    lr: float = 1e-3
    buffer_size: int = 4096
    policy: str = "hybrid"

    def to_dict(self):
        return asdict(self)


@dataclass
class Example:
    obs: np.ndarray
    mask: np.ndarray
    pi: np.ndarray
    z: float


def make_evaluator(net: PolicyValueNet, env):
    def evaluate(state):
        obs = torch.as_tensor(env.observe(state))[None]
        mask = torch.as_tensor(env.action_mask(state))[None]
        with torch.no_grad():
            logits, v = net(obs, mask)
        prior = torch.softmax(logits[0].double(), -1).numpy()
        return prior, float(np.clip(float(v[0]), 0.0, 1.0)) * env.remaining(state)
    return evaluate


def self_play(env, net: PolicyValueNet, config: AzConfig, seed: int) -> Tuple[List[Example], float]:
    """One training episode; returns its examples and total reward."""
    rng = np.random.default_rng(seed)
    evaluate = make_evaluator(net, env)
    s = env.reset()
    records, rewards, remaining = [], [], []
    step = 0
    while not s.done:
        dist, _ = mcts_search(s, env, evaluate, config.n_simulations, config.c_puct,
                              seed=seed * 100003 + step,
                              dirichlet=(config.dirichlet_alpha, config.dirichlet_eps))
        if config.temperature > 0:
            p = dist ** (1.0 / config.temperature)
            a = int(rng.choice(len(p), p=p / p.sum()))
        else:
            a = int(np.argmax(dist))
        records.append((env.observe(s), env.action_mask(s), dist))
        remaining.append(env.remaining(s))
        s, r, _ = env.step(s, a)
        rewards.append(r)
        step += 1
    togo = np.cumsum(rewards[::-1])[::-1] if rewards else np.zeros(0)
    examples = [Example(o, m, d, float(g) / max(1, n))
                for (o, m, d), g, n in zip(records, togo, remaining)]
    return examples, float(sum(rewards))


def az_losses(net: PolicyValueNet, batch: Sequence[Example]):
    obs = torch.as_tensor(np.stack([e.obs for e in batch]))
    mask = torch.as_tensor(np.stack([e.mask for e in batch]))
    pi = torch.as_tensor(np.stack([e.pi for e in batch]), dtype=torch.float32)
    z = torch.as_tensor([e.z for e in batch], dtype=torch.float32)
    logits, v = net(obs, mask)
    logp = torch.log_softmax(logits, -1)
    policy_loss = -(pi * torch.where(mask, logp, torch.zeros_like(logp))).sum(-1).mean()
    value_loss = ((v - z) ** 2).mean()
    return policy_loss, value_loss


def az_update(net: PolicyValueNet, opt, batch: Sequence[Example]) -> Tuple[float, float]:
    policy_loss, value_loss = az_losses(net, batch)
    loss = policy_loss + value_loss
    if not torch.isfinite(loss):
        raise TrainingDiverged(f"non-finite loss: policy={float(policy_loss.detach())}, "
                               f"value={float(value_loss.detach())}")
    opt.zero_grad()
    loss.backward()
    opt.step()
    return float(policy_loss.detach()), float(value_loss.detach())


def train_alphazero(env, config: AzConfig = None, seed: int = 0, net: Optional[PolicyValueNet] = None
                    ) -> Tuple[PolicyValueNet, List[Tuple[int, float]]]:
    """Alternate self-play and network updates.

    Returns the network and a curve of (episode, reward / number of requests).
    ``env`` may be a list of environments, cycled episode by episode.
    """
    config = config or AzConfig()
    envs = _envs(env)
    if net is None:
        net = make_net(NetConfig(obs_size=envs[0].obs_size, n_actions=envs[0].n_actions,
                                 policy=config.policy), seed)
    torch.manual_seed(seed)
    rng = np.random.default_rng(seed)
    opt = torch.optim.Adam(net.parameters(), lr=config.lr)
    buffer: List[Example] = []
    curve: List[Tuple[int, float]] = []
    episode = 0
    for _ in range(config.iterations):
        for _ in range(config.episodes_per_iter):
            e = envs[episode % len(envs)]
            ex, reward = self_play(e, net, config, seed * 7919 + episode)
            buffer.extend(ex)
            episode += 1
            curve.append((episode, reward / max(1, len(e.requests))))
        buffer = buffer[-config.buffer_size:]
        if not buffer:
            continue
        for _ in range(config.train_steps):
            idx = rng.choice(len(buffer), size=min(config.batch_size, len(buffer)), replace=False)
            az_update(net, opt, [buffer[i] for i in idx])
    return net, curve
