"""Scheduling engine and deterministic simulator for function-level
workflows on federated, heterogeneous compute endpoints."""

from .builtins import BUILTIN_NAMES, generate_builtin_scenario, single_endpoint_variant
from .dag import Dag, FunctionDef, TaskNode, TaskState, WorkflowError, dfs_order
from .data_manager import DataManager, TransferJob
from .endpoints import CapacityEvent, EndpointModel, EndpointSpec, scale_decision
from .engine import DeadlockError, Simulation, run_scenario
from .metrics import MetricsLog
from .profilers import ExecutionProfiler, TaskRecord, TransferProfiler, average_costs
from .scenario import Scenario, ScenarioError, load_scenario, save_scenario
from .scheduling import (
    STRATEGIES,
    capacity_partition,
    compute_priorities,
    locality_select,
)

__version__ = "0.1.0"

__all__ = [
    "BUILTIN_NAMES",
    "CapacityEvent",
    "Dag",
    "DataManager",
    "DeadlockError",
    "EndpointModel",
    "EndpointSpec",
    "ExecutionProfiler",
    "FunctionDef",
    "MetricsLog",
    "STRATEGIES",
    "Scenario",
    "ScenarioError",
    "Simulation",
    "TaskNode",
    "TaskRecord",
    "TaskState",
    "TransferJob",
    "TransferProfiler",
    "WorkflowError",
    "average_costs",
    "capacity_partition",
    "compute_priorities",
    "dfs_order",
    "generate_builtin_scenario",
    "load_scenario",
    "locality_select",
    "run_scenario",
    "save_scenario",
    "scale_decision",
    "single_endpoint_variant",
    "__version__",
]
