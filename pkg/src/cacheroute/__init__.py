"""Joint probabilistic caching and routing in networks with bounded link capacities."""
from .baselines import BaselineKind, alternating, optimal_routing, run_baseline
from .frankwolfe import FWConfig, frank_wolfe_variant
from .model import DemandModel, ModelError, NetworkInstance, Request, StrategyPair, validate_strategy
from .objective import build_context, cache_gain, edge_flows, gradient, lagrangian
from .primal_dual import PDConfig, RunReport, run_primal_dual
from .scenario import ScenarioSpec, build_counterexample, build_scenario

__version__ = "0.1.0"

__all__ = [
    "BaselineKind", "DemandModel", "FWConfig", "ModelError", "NetworkInstance", "PDConfig", "Request",
    "RunReport", "ScenarioSpec", "StrategyPair", "alternating", "build_context", "build_counterexample",
    "build_scenario", "cache_gain", "edge_flows", "frank_wolfe_variant", "gradient", "lagrangian",
    "optimal_routing", "run_baseline", "run_primal_dual", "validate_strategy",
]
