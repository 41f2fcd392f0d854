"""Forgiving Tree: a self-healing tree overlay and its simulator.

Deleting a node triggers a purely local repair among its neighbors,
planned in advance through wills. Across any deletion sequence, no
surviving node's degree grows by more than 3 and the diameter stretches
by at most an O(log max-degree) factor.
"""

from .adversaries import DeletionStrategy, make_adversary
from .baselines import make_strategy
from .experiments import (
    ExperimentGrid,
    LowerBoundReport,
    generate_tree,
    lower_bound_experiment,
    run_grid,
)
from .graph import Graph, RootedTree, bfs_spanning_tree, diameter, is_tree
from .harness import Engine, Msg, RefereeError, RunResult, SimulationError
from .protocol import ForgivingTree
from .referee import Violation, check
from .wills import Will, WillPortion, generate_sub_rt

__all__ = [
    "Graph",
    "RootedTree",
    "bfs_spanning_tree",
    "diameter",
    "is_tree",
    "Engine",
    "Msg",
    "RefereeError",
    "RunResult",
    "SimulationError",
    "ForgivingTree",
    "Violation",
    "check",
    "Will",
    "WillPortion",
    "generate_sub_rt",
    "DeletionStrategy",
    "make_adversary",
    "make_strategy",
    "ExperimentGrid",
    "LowerBoundReport",
    "generate_tree",
    "lower_bound_experiment",
    "run_grid",
]
