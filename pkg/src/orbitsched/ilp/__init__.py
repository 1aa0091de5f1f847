"""Exact integer planning per cluster: model building, branch-and-bound, oracle."""

from .model import (AngleGrid, IlpModel, RequestGrid, Row, TransitionTable, build_angle_grid,
                    build_cluster_model, build_model, build_transitions, dump_lp, objective_value,
                    priority_weights, violated_rows)
from .oracle import brute_force_oracle
from .planner import IlpPlanner, extract_plan, plan_clusters
from .solver import Assignment, solve_bb

__all__ = [
    "AngleGrid", "Assignment", "IlpModel", "IlpPlanner", "RequestGrid", "Row", "TransitionTable",
    "brute_force_oracle", "build_angle_grid", "build_cluster_model", "build_model",
    "build_transitions", "dump_lp", "extract_plan", "objective_value", "plan_clusters",
    "priority_weights", "solve_bb", "violated_rows",
]
