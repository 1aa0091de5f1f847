"""Reinforcement-learning planners: environments, PPO, tree search and AlphaZero training."""

from .alphazero import AzConfig, az_losses, az_update, make_evaluator, self_play, train_alphazero
from .checkpoint import (CheckpointError, load_checkpoint, read_curve, save_checkpoint, write_curve)
from .envs import OBS_SIZE, N_SLOTS, ReqEnv, ReqState, SatEnv, SatState, satellite_envs
from .mcts import MctsNode, mcts_search
from .nets import NetConfig, PolicyValueNet, make_net
from .planner import PolicyPlanner, plan_with_policy, rollout
from .ppo import PpoConfig, TrainingDiverged, evaluate_policy, gae, ppo_clip_loss, random_policy_return, train_ppo

__all__ = [
    "AzConfig", "CheckpointError", "MctsNode", "NetConfig", "N_SLOTS", "OBS_SIZE", "PolicyPlanner",
    "PolicyValueNet", "PpoConfig", "ReqEnv", "ReqState", "SatEnv", "SatState", "TrainingDiverged",
    "az_losses", "az_update", "evaluate_policy", "gae", "load_checkpoint", "make_evaluator", "make_net",
    "mcts_search", "plan_with_policy", "ppo_clip_loss", "random_policy_return", "read_curve", "rollout",
    "satellite_envs", "save_checkpoint", "self_play", "train_alphazero", "train_ppo", "write_curve",
]
