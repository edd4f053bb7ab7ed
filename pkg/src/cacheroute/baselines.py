"""Competitor pipelines that decide caching and routing separately."""
from __future__ import annotations

import enum
import time
from dataclasses import dataclass

import numpy as np

from .frankwolfe import FWConfig, frank_wolfe_variant
from .lp import OPTIMAL, solve_lp
from .metrics import INF_SENTINEL, compute_inf
from .model import DemandModel, NetworkInstance, StrategyPair
from .objective import ObjectiveContext, _survival, build_context, cache_gain, gradient
from .primal_dual import IterationRecord, RunReport


class BaselineKind(str, enum.Enum):
    RANDOM1 = "random1"
    RANDOM2 = "random2"
    GREEDY1 = "greedy1"
    GREEDY2 = "greedy2"
    ALTERNATING = "alternating"


@dataclass
class LPSolution:
    rho_tilde: np.ndarray | None
    objective: float
    status: str

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


def uniform_caching(instance: NetworkInstance, demand: DemandModel) -> np.ndarray:
    """Split each cache evenly over the items whose requests may pass through it.

    ``xi[v, i] = min(c_v / n_v, 1)`` where ``n_v`` counts distinct items with
    some candidate path visiting ``v`` before reaching a designated server.
    """
    xi = np.zeros((instance.n_nodes, instance.catalog_size))
    seen = np.zeros_like(xi, dtype=bool)
    for r, ps in zip(demand.requests, demand.paths):
        for p in ps:
            seen[list(p[:-1]), r.item] = True
    counts = seen.sum(axis=1)
    share = np.minimum(np.divide(instance.cache_capacities, counts, out=np.zeros(instance.n_nodes),
                                 where=counts > 0), 1.0)
    xi[seen] = np.broadcast_to(share[:, None], xi.shape)[seen]
    return xi


def greedy_caching(ctx: ObjectiveContext, rho_tilde: np.ndarray) -> np.ndarray:
    """Classic greedy: repeatedly cache the single (node, item) with the largest gain.

    With integral caching and fixed routing the marginal gain of a coordinate
    equals its gradient entry, so each round is one gradient evaluation.
    """
    inst = ctx.instance
    y = np.zeros(ctx.dim)
    y[ctx.n_xi:] = rho_tilde
    residual = inst.cache_capacities.astype(np.int64).copy()
    node_of = np.repeat(np.arange(inst.n_nodes), inst.catalog_size)
    while residual.any():
        g = gradient(ctx, y)[:ctx.n_xi]
        g[(y[:ctx.n_xi] > 0) | (residual[node_of] <= 0)] = -np.inf
        j = int(np.argmax(g))
        if not g[j] > 0:
            break
        y[j] = 1.0
        residual[node_of[j]] -= 1
    return y[:ctx.n_xi].reshape(inst.n_nodes, inst.catalog_size)


def fw_caching(ctx: ObjectiveContext, rho_tilde: np.ndarray, config: FWConfig = FWConfig()) -> np.ndarray:
    y = frank_wolfe_variant(ctx, None, config, fixed_rho_tilde=rho_tilde).y
    return y[:ctx.n_xi].reshape(ctx.instance.n_nodes, ctx.instance.catalog_size)


def optimal_routing(ctx: ObjectiveContext, xi: np.ndarray) -> LPSolution:
    """Best routing for fixed caching subject to all link capacities.

    With caching fixed the gain is affine in the routing variables, so this
    is a linear program over per-request simplices plus one row per loaded edge.
    """
    inst = ctx.instance
    y = np.zeros(ctx.dim)
    y[:ctx.n_xi] = np.asarray(xi, dtype=float).ravel()
    _, prefix = _survival(ctx, y)
    reach = prefix * ctx.hop_mask * ctx.path_rate[:, None]     # per unit of routing mass
    cost = np.sum(reach * ctx.hop_weight, axis=1)
    P, R = ctx.n_paths, ctx.demand.n_requests
    A_eq = np.zeros((R, P))
    A_eq[ctx.path_request, np.arange(P)] = 1.0
    A_full = np.zeros((inst.n_edges, P))
    rows_p = np.broadcast_to(np.arange(P)[:, None], ctx.hop_edge.shape)
    m = ctx.hop_mask
    np.add.at(A_full, (ctx.hop_edge[m], rows_p[m]), reach[m])
    loaded = np.flatnonzero(np.any(A_full > 0, axis=1))
    res = solve_lp(cost, A_full[loaded], inst.capacities[loaded], A_eq, np.ones(R))
    if res.status != OPTIMAL:
        return LPSolution(None, float("nan"), res.status)
    rho = np.clip(res.x, 0.0, 1.0)
    y[ctx.n_xi:] = 1.0 - rho
    return LPSolution(y[ctx.n_xi:].copy(), float(cache_gain(ctx, y)), OPTIMAL)


def _report(name: str, ctx: ObjectiveContext, xi, rho_tilde, feasible: bool, records, start,
            converged=True, notes=None) -> RunReport:
    inst = ctx.instance
    rt = np.zeros(ctx.n_paths) if rho_tilde is None else np.asarray(rho_tilde)
    strategy = StrategyPair(np.asarray(xi, dtype=float).reshape(inst.n_nodes, inst.catalog_size), rt)
    if feasible:
        gain = float(cache_gain(ctx, strategy))
        inf, max_inf = compute_inf(ctx, strategy)
    else:
        gain, inf, max_inf = 0.0, INF_SENTINEL, INF_SENTINEL
    if not records or records[-1].gain != gain or records[-1].inf != inf:
        records.append(IterationRecord(len(records), gain, gain, inf, max_inf, 0.0))
    return RunReport(name, records, strategy, np.zeros(inst.n_edges), converged, len(records),
                     time.perf_counter() - start, feasible, gain, inf, max_inf, dict(notes or {}))


def run_baseline(kind, instance: NetworkInstance, demand: DemandModel,
                 ctx: ObjectiveContext | None = None, fw: FWConfig = FWConfig()) -> RunReport:
    kind = BaselineKind(kind)
    if kind is BaselineKind.ALTERNATING:
        return alternating(instance, demand, ctx=ctx, fw=fw)
    start = time.perf_counter()
    ctx = ctx or build_context(instance, demand)
    zero_route = np.zeros(ctx.n_paths)
    if kind in (BaselineKind.RANDOM1, BaselineKind.GREEDY1):
        if kind is BaselineKind.RANDOM1:
            xi = uniform_caching(instance, demand)
        else:
            xi = greedy_caching(ctx, zero_route)
        sol = optimal_routing(ctx, xi)
        return _report(kind.value, ctx, xi, sol.rho_tilde, sol.optimal, [], start,
                       notes={"failed_step": None if sol.optimal else 2})
    sol = optimal_routing(ctx, np.zeros((instance.n_nodes, instance.catalog_size)))
    if not sol.optimal:
        return _report(kind.value, ctx, np.zeros(ctx.n_xi), None, False, [], start,
                       notes={"failed_step": 1})
    if kind is BaselineKind.RANDOM2:
        xi = uniform_caching(instance, demand)
    else:
        xi = greedy_caching(ctx, sol.rho_tilde)
    return _report(kind.value, ctx, xi, sol.rho_tilde, True, [], start, notes={"failed_step": None})


def alternating(instance: NetworkInstance, demand: DemandModel, max_rounds: int = 25,
                gain_tol: float = 1e-3, ctx: ObjectiveContext | None = None,
                fw: FWConfig = FWConfig()) -> RunReport:
    """Alternate caching-only Frank-Wolfe and optimal routing.

    A new caching is kept only if it does not lower the gain under the
    current routing.
    """
    start = time.perf_counter()
    ctx = ctx or build_context(instance, demand)
    rho_tilde = np.zeros(ctx.n_paths)
    xi = None
    records: list[IterationRecord] = []
    prev = None
    converged = False
    for rnd in range(max_rounds):
        cand = fw_caching(ctx, rho_tilde, fw)
        if xi is not None:
            cur = cache_gain(ctx, np.concatenate([xi.ravel(), rho_tilde]))
            if cache_gain(ctx, np.concatenate([cand.ravel(), rho_tilde])) < cur:
                cand = xi
        xi = cand
        sol = optimal_routing(ctx, xi)
        if not sol.optimal:
            return _report("alternating", ctx, xi, None, False, records, start, converged=False,
                           notes={"failed_round": rnd})
        rho_tilde = sol.rho_tilde
        gain = sol.objective
        inf, max_inf = compute_inf(ctx, np.concatenate([xi.ravel(), rho_tilde]))
        records.append(IterationRecord(rnd, gain, gain, inf, max_inf, 0.0))
        if prev is not None and abs(gain - prev) < gain_tol:
            converged = True
            break
        prev = gain
    return _report("alternating", ctx, xi, rho_tilde, True, records, start, converged=converged)
