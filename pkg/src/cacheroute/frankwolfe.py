"""Frank-Wolfe variant over the down-closed relaxation of the strategy set.

The relaxed set keeps the box and cache-capacity constraints but only asks
``sum_p rho_tilde_p <= |P| - 1`` per request.  Its linear maximization
oracle decomposes into independent top-k selections per node and per
request.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .objective import ObjectiveContext, gradient, lagrangian


@dataclass(frozen=True)
class FWConfig:
    iterations: int = 100
    max_iterations: int = 100_000

    def __post_init__(self):
        if not 1 <= self.iterations <= self.max_iterations:
            raise ValueError(f"iterations must lie in [1, {self.max_iterations}]")

    @property
    def step(self) -> float:
        return 1.0 / self.iterations


@dataclass
class FWResult:
    y: np.ndarray
    objective: list[float] = field(default_factory=list)
    iterates: list[np.ndarray] = field(default_factory=list)


def _top_k_rows(scores: np.ndarray, budget: np.ndarray) -> np.ndarray:
    """0/1 mask picking, per row, the ``budget`` largest strictly positive scores.

    Ties go to the lowest column index.
    """
    if scores.size == 0:
        return np.zeros(scores.shape, dtype=bool)
    order = np.argsort(-scores, axis=1, kind="stable")
    rank = np.argsort(order, axis=1)
    return (rank < budget[:, None]) & (scores > 0)


def lmo(ctx: ObjectiveContext, grad: np.ndarray, cache_only: bool = False) -> np.ndarray:
    """Vertex of the relaxed set maximizing ``<v, grad>``."""
    inst = ctx.instance
    v = np.zeros(ctx.dim)
    g_xi = grad[:ctx.n_xi].reshape(inst.n_nodes, inst.catalog_size)
    v[:ctx.n_xi] = _top_k_rows(g_xi, inst.cache_capacities).ravel()
    if not cache_only and ctx.route_slots.size:
        slots = ctx.route_slots
        g_rho = np.where(slots >= 0, grad[ctx.n_xi + np.maximum(slots, 0)], -np.inf)
        budget = (slots >= 0).sum(axis=1) - 1
        pick = _top_k_rows(g_rho, budget)
        v[ctx.n_xi + slots[pick]] = 1.0
    return v


def bind_routing(ctx: ObjectiveContext, y: np.ndarray, psi=None) -> np.ndarray:
    """Raise routing complements until every request's routing sum binds.

    Slack is spent greedily on the largest gradient entries (lowest index on
    ties).  The objective is non-decreasing in every coordinate so this never
    lowers it.
    """
    y = np.array(y, dtype=float)
    if not ctx.route_slots.size:
        return y
    grad = gradient(ctx, y, psi)
    for slots in ctx.route_slots:
        slots = slots[slots >= 0] + ctx.n_xi
        slack = len(slots) - 1 - y[slots].sum()
        if slack <= 0:
            continue
        for j in slots[np.argsort(-grad[slots], kind="stable")]:
            add = min(1.0 - y[j], slack)
            y[j] += add
            slack -= add
            if slack <= 0:
                break
    return y


def frank_wolfe_variant(ctx: ObjectiveContext, psi=None, config: FWConfig = FWConfig(),
                        fixed_rho_tilde: np.ndarray | None = None, bind: bool = True,
                        record: bool = False) -> FWResult:
    """Maximize the Lagrangian for fixed multipliers, starting from zero.

    With ``fixed_rho_tilde`` only the caching block moves (the routing block
    is held at the given values); this is the caching-only solver used by
    the alternating baseline.  ``record`` keeps every iterate and its
    objective value.
    """
    y = np.zeros(ctx.dim)
    cache_only = fixed_rho_tilde is not None
    if cache_only:
        y[ctx.n_xi:] = fixed_rho_tilde
    # y = (sum of chosen vertices) / K; counting keeps full-mass coordinates at exactly 1
    counts = np.zeros(ctx.dim)
    moving = slice(0, ctx.n_xi) if cache_only else slice(0, ctx.dim)
    K = config.iterations
    result = FWResult(y)
    for _ in range(K):
        v = lmo(ctx, gradient(ctx, y, psi), cache_only=cache_only)
        counts[moving] += v[moving]
        y[moving] = counts[moving] / K
        if record:
            result.objective.append(float(lagrangian(ctx, y, psi)))
            result.iterates.append(y.copy())
    np.clip(y, 0.0, 1.0, out=y)
    if bind and not cache_only:
        y = bind_routing(ctx, y, psi)
    result.y = y
    return result
