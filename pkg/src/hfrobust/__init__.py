"""Robustness analysis of interdependent urban utility networks."""

from .builder import ScenarioError, build, build_graph, load_scenario
from .centrality import CentralityBasis, ConvergenceError, rank_nodes, scores
from .experiments import CampaignSpec, degradation_table, run_campaign, stages_to_degradation
from .graph import (DependencyEdge, GraphError, GraphValidationError, ProcessGraph, ProcessNode,
                    read_graph_csv, write_graph_csv)
from .metrics import RobustnessSnapshot, snapshot
from .optimizer import OptimizationSpec, optimize
from .percolation import AttackPlan, PercolationTrace, StageRecord, cascade, run_attack, simulate

__version__ = "0.1.0"

__all__ = [
    "AttackPlan", "CampaignSpec", "CentralityBasis", "ConvergenceError", "DependencyEdge",
    "GraphError", "GraphValidationError", "OptimizationSpec", "PercolationTrace", "ProcessGraph",
    "ProcessNode", "RobustnessSnapshot", "ScenarioError", "StageRecord", "build", "build_graph",
    "cascade", "degradation_table", "load_scenario", "optimize", "rank_nodes",
    "read_graph_csv", "run_attack", "run_campaign", "scores", "simulate", "snapshot",
    "stages_to_degradation", "write_graph_csv",
]
