"""Proximal policy optimisation with the clipped surrogate."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import List, Tuple

import numpy as np
import torch

from .nets import NetConfig, PolicyValueNet, make_net


def ppo_clip_loss(ratios, advantages, epsilon: float):
    """Mean of min(r A, clip(r, 1-eps, 1+eps) A): the surrogate to maximise.

    Torch inputs give a tensor (differentiable); anything else gives a float.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    as_tensor = isinstance(ratios, torch.Tensor) and isinstance(advantages, torch.Tensor)
    r = ratios if as_tensor else torch.as_tensor(np.asarray(ratios, dtype=float))
    a = advantages if as_tensor else torch.as_tensor(np.asarray(advantages, dtype=float))
    if r.shape != a.shape:
        raise ValueError(f"ratios {tuple(r.shape)} and advantages {tuple(a.shape)} differ in shape")
    surr = torch.minimum(r * a, torch.clamp(r, 1 - epsilon, 1 + epsilon) * a).mean()
    return surr if as_tensor else float(surr)


def gae(rewards, values, dones, last_value: float, gamma: float, lam: float) -> Tuple[np.ndarray, np.ndarray]:
    """Generalised advantage estimates and returns; ``dones[t]`` ends the episode after step t."""
    T = len(rewards)
    adv = np.zeros(T)
    last = 0.0
    for t in reversed(range(T)):
        nxt = last_value if t == T - 1 else values[t + 1]
        nonterm = 0.0 if dones[t] else 1.0
        delta = rewards[t] + gamma * nxt * nonterm - values[t]
        last = delta + gamma * lam * nonterm * last
        adv[t] = last
    return adv, adv + np.asarray(values, dtype=float)


@dataclass
class PpoConfig:
    total_steps: int = 20000
    rollout_steps: int = 512
    epochs: int = 4
    minibatch: int = 128
    lr: float = 3e-4
    clip: float = 0.2
    gamma: float = 0.99
    lam: float = 0.95
    vf_coef: float = 0.5
    ent_coef: float = 0.01
    max_grad_norm: float = 0.5
    policy: str = "classical"

    def to_dict(self):
        return asdict(self)


class TrainingDiverged(FloatingPointError):
    pass


def _envs(env) -> list:
    return list(env) if isinstance(env, (list, tuple)) else [env]


def random_policy_return(env, episodes: int = 20, seed: int = 0) -> float:
    """Mean episode reward of uniformly random actions."""
    rng = np.random.default_rng(seed)
    envs = _envs(env)
    total = 0.0
    for ep in range(episodes):
        e = envs[ep % len(envs)]
        s, done = e.reset(), False
        done = getattr(s, "done", False)
        while not done:
            s, r, done = e.step(s, int(rng.integers(e.n_actions)))
            total += r
    return total / episodes


def evaluate_policy(net: PolicyValueNet, env, episodes: int = 1, greedy: bool = True, seed: int = 0,
                    mask: bool = False) -> float:
    """Mean episode reward of the policy (argmax by default)."""
    gen = torch.Generator().manual_seed(seed)
    envs = _envs(env)
    total = 0.0
    with torch.no_grad():
        for ep in range(episodes):
            e = envs[ep % len(envs)]
            s = e.reset()
            done = s.done
            while not done:
                obs = torch.as_tensor(e.observe(s))[None]
                m = torch.as_tensor(e.action_mask(s))[None] if mask else None
                logits, _ = net(obs, m)
                if greedy:
                    a = int(torch.argmax(logits[0]))
                else:
                    a = int(torch.multinomial(torch.softmax(logits[0], -1), 1, generator=gen))
                s, r, done = e.step(s, a)
                total += r
    return total / episodes


def train_ppo(env, policy: str = "classical", config: PpoConfig = None, seed: int = 0,
              net: PolicyValueNet = None) -> Tuple[PolicyValueNet, List[Tuple[int, float]]]:
    """On-policy PPO; returns the network and a (step, mean episode reward) curve.

    ``env`` is one environment or a list cycled episode by episode. Actions
    are sampled over all slots without masking; infeasible picks simply earn
    nothing.
    """
    config = config or PpoConfig(policy=policy)
    envs = _envs(env)
    if net is None:
        net = make_net(NetConfig(obs_size=envs[0].obs_size, n_actions=envs[0].n_actions,
                                 policy=policy), seed)
    torch.manual_seed(seed)
    gen = torch.Generator().manual_seed(seed)
    opt = torch.optim.Adam(net.parameters(), lr=config.lr)
    curve: List[Tuple[int, float]] = []
    ep_index = 0
    e = envs[0]
    s = e.reset()
    ep_reward, finished = 0.0, []
    steps = 0
    while steps < config.total_steps:
        obs_b, act_b, logp_b, val_b, rew_b, done_b = [], [], [], [], [], []
        with torch.no_grad():
            for _ in range(config.rollout_steps):
                obs = torch.as_tensor(e.observe(s))
                logits, v = net(obs[None])
                probs = torch.softmax(logits[0], -1)
                a = int(torch.multinomial(probs, 1, generator=gen))
                s2, r, done = e.step(s, a)
                obs_b.append(obs)
                act_b.append(a)
                logp_b.append(float(torch.log(probs[a] + 1e-12)))
                val_b.append(float(v[0]))
                rew_b.append(r)
                done_b.append(done)
                ep_reward += r
                steps += 1
                if done:
                    finished.append(ep_reward)
                    ep_reward = 0.0
                    ep_index += 1
                    e = envs[ep_index % len(envs)]
                    s = e.reset()
                else:
                    s = s2
            last_v = 0.0 if done_b[-1] else float(net(torch.as_tensor(e.observe(s))[None])[1][0])
        adv, ret = gae(rew_b, val_b, done_b, last_v, config.gamma, config.lam)
        obs_t = torch.stack(obs_b)
        act_t = torch.as_tensor(act_b)
        old_logp = torch.as_tensor(logp_b, dtype=torch.float32)
        adv_t = torch.as_tensor(adv, dtype=torch.float32)
        ret_t = torch.as_tensor(ret, dtype=torch.float32)
        n = len(act_b)
        for _ in range(config.epochs):
            perm = torch.randperm(n, generator=gen)
            for i in range(0, n, config.minibatch):
                idx = perm[i:i + config.minibatch]
                logits, v = net(obs_t[idx])
                logp_all = torch.log_softmax(logits, -1)
                logp = logp_all.gather(1, act_t[idx, None]).squeeze(1)
                a_mb = adv_t[idx]
                a_mb = (a_mb - a_mb.mean()) / (a_mb.std(unbiased=False) + 1e-8)
                ratio = torch.exp(logp - old_logp[idx])
                surr = ppo_clip_loss(ratio, a_mb, config.clip)
                v_loss = ((v - ret_t[idx]) ** 2).mean()
                entropy = -(logp_all.exp() * logp_all).sum(-1).mean()
                loss = -surr + config.vf_coef * v_loss - config.ent_coef * entropy
                if not torch.isfinite(loss):
                    raise TrainingDiverged(f"non-finite loss at step {steps}: surrogate={float(surr.detach())}, "
                                           f"value={float(v_loss.detach())}, entropy={float(entropy.detach())}")
                opt.zero_grad()
                loss.backward()
                torch.nn.utils.clip_grad_norm_(net.parameters(), config.max_grad_norm)
                opt.step()
        mean_r = float(np.mean(finished)) if finished else (curve[-1][1] if curve else 0.0)
        curve.append((steps, mean_r))
        finished = []
    return net, curve
