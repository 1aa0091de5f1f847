"""Policy/value networks: MLP encoder, value neuron, classical or circuit policy head."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional, Tuple

import torch
from torch import nn

from ..quantum import DEFAULT_SPEC, pqc
from .envs import N_SLOTS, OBS_SIZE

MASK_VALUE = -1e9


@dataclass(frozen=True)
class NetConfig:
    obs_size: int = OBS_SIZE
    n_actions: int = N_SLOTS
    hidden: Tuple[int, int] = (256, 32)
    policy: str = "classical"  # or "hybrid"

    def to_dict(self):
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["hidden"] = tuple(d["hidden"])
        return cls(**d)


class Encoder(nn.Module):
    """obs -> 256 -> 32; the 32-dim output is squashed to (-1, 1)."""

    def __init__(self, obs_size: int, hidden=(256, 32)):
        super().__init__()
        self.fc1 = nn.Linear(obs_size, hidden[0])
        self.fc2 = nn.Linear(hidden[0], hidden[1])

    def forward(self, x):
        return torch.tanh(self.fc2(torch.relu(self.fc1(x))))


class HybridHead(nn.Module):
    """Encoder features (scaled to angles) -> 4-qubit circuit -> 2 expectations -> affine map."""

    def __init__(self, n_actions: int):
        super().__init__()
        self.theta = nn.Parameter(torch.empty(DEFAULT_SPEC.n_params).uniform_(-math.pi, math.pi))
        self.out = nn.Linear(len(DEFAULT_SPEC.measured), n_actions)

    def forward(self, z):
        return self.out(pqc(math.pi * z, self.theta))


class PolicyValueNet(nn.Module):
    def __init__(self, config: NetConfig = NetConfig()):
        super().__init__()
        if config.policy not in ("classical", "hybrid"):
            raise ValueError(f"unknown policy head {config.policy!r}")
        if config.policy == "hybrid" and config.hidden[1] != DEFAULT_SPEC.n_features:
            raise ValueError(f"hybrid head needs a {DEFAULT_SPEC.n_features}-dim encoder output")
        self.config = config
        self.encoder = Encoder(config.obs_size, config.hidden)
        self.value_head = nn.Linear(config.hidden[1], 1)
        if config.policy == "classical":
            self.policy_head = nn.Linear(config.hidden[1], config.n_actions)
        else:
            self.policy_head = HybridHead(config.n_actions)

    def forward(self, obs, mask: Optional[torch.Tensor] = None):
        """(logits, value); masked-out actions get a large negative logit."""
        z = self.encoder(obs)
        logits = self.policy_head(z)
        if mask is not None:
            logits = torch.where(mask, logits, torch.full_like(logits, MASK_VALUE))
        return logits, self.value_head(z).squeeze(-1)


def make_net(config: NetConfig = NetConfig(), seed: int = 0) -> PolicyValueNet:
    torch.manual_seed(seed)
    return PolicyValueNet(config)
