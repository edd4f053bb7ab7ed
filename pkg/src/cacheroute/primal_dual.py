"""Primal-dual heuristic: momentum-smoothed Frank-Wolfe primal steps and
projected dual ascent on the link multipliers."""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .frankwolfe import FWConfig, bind_routing, frank_wolfe_variant, lmo
from .metrics import compute_inf
from .model import DemandModel, NetworkInstance, StrategyPair
from .objective import ObjectiveContext, build_context, cache_gain, gradient, lagrangian, overflows

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PDConfig:
    max_iterations: int = 1000
    dual_scale: float | None = None   # c in beta_t = c / sqrt(t); None picks it adaptively
    inf_tol: float = 1e-3
    gain_tol: float = 1e-3
    momentum: bool = True
    stop_on_convergence: bool = True
    max_restarts: int = 30
    fw: FWConfig = FWConfig()

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be positive")
        if self.dual_scale is not None and self.dual_scale <= 0:
            raise ValueError("dual_scale must be positive")
        if self.inf_tol <= 0 or self.gain_tol <= 0:
            raise ValueError("convergence thresholds must be positive")


@dataclass
class IterationRecord:
    t: int
    gain: float
    lagrangian: float
    inf: float
    max_inf: float
    dual_norm: float


@dataclass
class RunReport:
    algorithm: str
    records: list[IterationRecord]
    strategy: StrategyPair | None
    psi: np.ndarray
    converged: bool
    iterations: int
    wall_time: float
    feasible: bool = True
    gain: float = 0.0
    inf: float = 0.0
    max_inf: float = 0.0
    notes: dict = field(default_factory=dict)


def momentum_weight(t: int, momentum: bool = True) -> float:
    return 2.0 / (t + 2) if momentum else 1.0


def dual_step_size(t: int, scale: float) -> float:
    return scale if t == 0 else scale / math.sqrt(t)


def primal_step(ctx: ObjectiveContext, y_t: np.ndarray, psi_t: np.ndarray, t: int,
                config: PDConfig = PDConfig(), y_fw: np.ndarray | None = None) -> np.ndarray:
    """Convex combination of a Frank-Wolfe solve and the current point."""
    if y_fw is None:
        y_fw = frank_wolfe_variant(ctx, psi_t, config.fw).y
    a = momentum_weight(t, config.momentum)
    return a * y_fw + (1.0 - a) * np.asarray(y_t, dtype=float)


def dual_step(ctx: ObjectiveContext, y_next: np.ndarray, psi_t: np.ndarray, t: int, scale: float) -> np.ndarray:
    """Projected dual ascent along the overflows at the new primal point."""
    return np.maximum(psi_t + dual_step_size(t, scale) * overflows(ctx, y_next), 0.0)


def initial_point(ctx: ObjectiveContext) -> np.ndarray:
    y0 = np.zeros(ctx.dim)
    return bind_routing(ctx, lmo(ctx, gradient(ctx, y0)), None)


def initial_dual_scale(ctx: ObjectiveContext, y1: np.ndarray, eps: float = 1e-9) -> float:
    """Ratio of the gain to the total positive overflow at the first iterate."""
    over = np.maximum(overflows(ctx, y1), 0.0).sum()
    return max(float(cache_gain(ctx, y1)), eps) / (over + eps)


def _attempt(ctx: ObjectiveContext, config: PDConfig, scale: float | None, adaptive: bool, callback=None):
    """One pass of the main loop; returns None if the Lagrangian went negative."""
    n_edges = ctx.instance.n_edges
    y = initial_point(ctx)
    psi = np.zeros(n_edges)
    records: list[IterationRecord] = []
    converged = False
    prev_gain = None
    for t in range(config.max_iterations):
        y_fw = frank_wolfe_variant(ctx, psi, config.fw).y
        y = primal_step(ctx, y, psi, t, config, y_fw=y_fw)
        if scale is None:
            scale = initial_dual_scale(ctx, y)
            log.info("dual step scale initialized to %.6g", scale)
        psi = dual_step(ctx, y, psi, t, scale)
        gain = float(cache_gain(ctx, y))
        lag = float(lagrangian(ctx, y, psi))
        inf, max_inf = compute_inf(ctx, y)
        records.append(IterationRecord(t, gain, lag, inf, max_inf, float(np.linalg.norm(psi))))
        if callback is not None:
            callback(t, y, psi)
        if adaptive and lag < 0:
            return None, scale
        if prev_gain is not None and inf <= config.inf_tol and abs(gain - prev_gain) < config.gain_tol:
            converged = True
            if config.stop_on_convergence:
                break
        prev_gain = gain
    return (y, psi, records, converged), scale


def run_primal_dual(instance: NetworkInstance, demand: DemandModel, config: PDConfig = PDConfig(),
                    ctx: ObjectiveContext | None = None, callback=None) -> RunReport:
    """Run the primal-dual loop until convergence or the iteration cap.

    ``callback(t, y, psi)`` sees the new iterate and multipliers after every
    iteration, including iterations of attempts that are later restarted
    with a smaller dual step.  It must not modify them.
    """
    start = time.perf_counter()
    ctx = ctx or build_context(instance, demand)
    adaptive = config.dual_scale is None
    scale = config.dual_scale
    restarts = 0
    while True:
        out, scale = _attempt(ctx, config, scale, adaptive and restarts < config.max_restarts, callback)
        if out is not None:
            break
        restarts += 1
        scale /= 2.0
        log.info("Lagrangian went negative; halving dual scale to %.6g (restart %d)", scale, restarts)
    y, psi, records, converged = out
    inf, max_inf = compute_inf(ctx, y)
    return RunReport(
        algorithm="primaldual",
        records=records,
        strategy=StrategyPair.from_vector(y, instance.n_nodes, instance.catalog_size),
        psi=psi,
        converged=converged,
        iterations=len(records),
        wall_time=time.perf_counter() - start,
        gain=float(cache_gain(ctx, y)),
        inf=inf,
        max_inf=max_inf,
        notes={"dual_scale": scale, "restarts": restarts},
    )
