"""Expected cost, cache gain, edge flows, overflows and the Lagrangian.

All functions take the flat primal vector ``y`` (see :mod:`cacheroute.model`
for the layout).  Evaluation functions also accept a batch of points with
shape ``(B, n)`` and then return one value (or row) per point.

Every path is stored as a row of "hops": hop ``k`` (0-based) of path ``p``
is the cache at node ``p[k]`` followed by the response edge
``(p[k+1], p[k])``.  A hop is reached by the request with probability
``(1 - rho_tilde_p) * prod_{k' <= k} (1 - xi[p[k'], item])``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import DemandModel, DimensionError, ModelError, NetworkInstance, StrategyPair, check_demand


@dataclass(frozen=True, eq=False)
class ObjectiveContext:
    instance: NetworkInstance
    demand: DemandModel
    hop_xi: np.ndarray        # (P, H) flat xi index of the cache at each hop
    hop_edge: np.ndarray      # (P, H) index of the response edge
    hop_weight: np.ndarray    # (P, H) weight of that edge, 0 on padding
    hop_mask: np.ndarray      # (P, H) True on real hops
    path_rate: np.ndarray     # (P,) rate of the owning request
    path_request: np.ndarray  # (P,) owning request index
    edge_order: np.ndarray    # flat hop indices sorted by edge
    edge_starts: np.ndarray   # segment starts in edge_order
    edge_ids: np.ndarray      # edge of each segment
    route_slots: np.ndarray   # (R, Pmax) rho_tilde offsets per request, -1 on padding
    c0: float

    @property
    def n_xi(self) -> int:
        return self.instance.n_xi

    @property
    def n_paths(self) -> int:
        return self.hop_xi.shape[0]

    @property
    def dim(self) -> int:
        return self.n_xi + self.n_paths


def build_context(instance: NetworkInstance, demand: DemandModel, check: bool = True) -> ObjectiveContext:
    if check:
        check_demand(instance, demand)
    C = instance.catalog_size
    rows = [(r, req, p) for r, (req, ps) in enumerate(zip(demand.requests, demand.paths)) for p in ps]
    H = max([len(p) - 1 for _, _, p in rows], default=0)
    H = max(H, 1)
    P = len(rows)
    hop_xi = np.zeros((P, H), dtype=np.int64)
    hop_edge = np.zeros((P, H), dtype=np.int64)
    hop_weight = np.zeros((P, H))
    hop_mask = np.zeros((P, H), dtype=bool)
    path_rate = np.zeros(P)
    path_request = np.zeros(P, dtype=np.int64)
    for j, (r, req, p) in enumerate(rows):
        path_rate[j] = req.rate
        path_request[j] = r
        for k in range(len(p) - 1):
            e = instance.edge_index[(p[k + 1], p[k])]
            hop_xi[j, k] = p[k] * C + req.item
            hop_edge[j, k] = e
            hop_weight[j, k] = instance.weights[e]
            hop_mask[j, k] = True
    flat_mask = hop_mask.ravel()
    flat_edge = hop_edge.ravel()
    real = np.flatnonzero(flat_mask)
    order = real[np.argsort(flat_edge[real], kind="stable")]
    sorted_edges = flat_edge[order]
    if order.size:
        starts = np.flatnonzero(np.concatenate([[True], sorted_edges[1:] != sorted_edges[:-1]]))
        edge_ids = sorted_edges[starts]
    else:
        starts = np.zeros(0, dtype=np.int64)
        edge_ids = np.zeros(0, dtype=np.int64)
    c0 = float(np.sum(path_rate[:, None] * hop_weight))
    sizes = [len(ps) for ps in demand.paths]
    route_slots = -np.ones((len(sizes), max(sizes, default=0)), dtype=np.int64)
    off = 0
    for r, n in enumerate(sizes):
        route_slots[r, :n] = np.arange(off, off + n)
        off += n
    return ObjectiveContext(instance, demand, hop_xi, hop_edge, hop_weight, hop_mask,
                            path_rate, path_request, order, starts, edge_ids, route_slots, c0)


def _check_dim(ctx: ObjectiveContext, y) -> np.ndarray:
    if isinstance(y, StrategyPair):
        y = y.vector
    y = np.asarray(y, dtype=float)
    if y.shape[-1] != ctx.dim:
        raise DimensionError(f"expected {ctx.dim} coordinates, got {y.shape[-1]}")
    return y


def _survival(ctx: ObjectiveContext, y: np.ndarray):
    """(1 - xi) per hop and its running product, shapes (..., P, H)."""
    one_minus = np.where(ctx.hop_mask, 1.0 - y[..., ctx.hop_xi], 1.0)
    return one_minus, np.cumprod(one_minus, axis=-1)


def _reach(ctx: ObjectiveContext, y: np.ndarray) -> np.ndarray:
    """Probability that each hop's response edge is traversed, (..., P, H)."""
    _, prefix = _survival(ctx, y)
    route = 1.0 - y[..., ctx.n_xi:]
    return route[..., :, None] * prefix * ctx.hop_mask


def expected_cost(ctx: ObjectiveContext, y) -> float | np.ndarray:
    y = _check_dim(ctx, y)
    return np.sum(ctx.path_rate[:, None] * ctx.hop_weight * _reach(ctx, y), axis=(-2, -1))


def cache_gain(ctx: ObjectiveContext, y) -> float | np.ndarray:
    return ctx.c0 - expected_cost(ctx, y)


def _flows_from_reach(ctx: ObjectiveContext, reach: np.ndarray) -> np.ndarray:
    lead = reach.shape[:-2]
    out = np.zeros(lead + (ctx.instance.n_edges,))
    if ctx.edge_order.size:
        vals = (ctx.path_rate[:, None] * reach).reshape(lead + (-1,))[..., ctx.edge_order]
        out[..., ctx.edge_ids] = np.add.reduceat(vals, ctx.edge_starts, axis=-1)
    return out


def edge_flows(ctx: ObjectiveContext, y) -> np.ndarray:
    """Expected per-slot traffic on every edge."""
    y = _check_dim(ctx, y)
    return _flows_from_reach(ctx, _reach(ctx, y))


def overflows(ctx: ObjectiveContext, y) -> np.ndarray:
    return edge_flows(ctx, y) - ctx.instance.capacities


def _edge_id(ctx: ObjectiveContext, edge) -> int:
    if isinstance(edge, (tuple, list)):
        try:
            return ctx.instance.edge_index[(int(edge[0]), int(edge[1]))]
        except KeyError:
            raise ModelError(f"unknown edge {tuple(edge)}") from None
    e = int(edge)
    if not 0 <= e < ctx.instance.n_edges:
        raise ModelError(f"unknown edge index {e}")
    return e


def edge_flow(ctx: ObjectiveContext, y, edge) -> float:
    return edge_flows(ctx, y)[..., _edge_id(ctx, edge)]


def overflow(ctx: ObjectiveContext, y, edge) -> float:
    e = _edge_id(ctx, edge)
    return edge_flows(ctx, y)[..., e] - ctx.instance.capacities[e]


def _check_psi(ctx: ObjectiveContext, psi) -> np.ndarray:
    if psi is None:
        return np.zeros(ctx.instance.n_edges)
    psi = np.asarray(getattr(psi, "psi", psi), dtype=float)
    if psi.shape != (ctx.instance.n_edges,):
        raise DimensionError("need one multiplier per edge")
    if np.any(psi < 0):
        raise ValueError("dual multipliers must be nonnegative")
    return psi


def lagrangian(ctx: ObjectiveContext, y, psi) -> float | np.ndarray:
    """Cache gain minus multiplier-weighted overflows."""
    psi = _check_psi(ctx, psi)
    y = _check_dim(ctx, y)
    reach = _reach(ctx, y)
    gain = ctx.c0 - np.sum(ctx.path_rate[:, None] * ctx.hop_weight * reach, axis=(-2, -1))
    g = _flows_from_reach(ctx, reach) - ctx.instance.capacities
    return gain - g @ psi


def penalty_offset(ctx: ObjectiveContext, psi) -> float:
    """sum_e psi_e (total demand - mu_e): shifts the Lagrangian to be nonnegative."""
    psi = _check_psi(ctx, psi)
    total = float(ctx.demand.rates().sum())
    return float(psi @ (total - ctx.instance.capacities))


def _hop_gradient(ctx: ObjectiveContext, y: np.ndarray, coef: np.ndarray) -> np.ndarray:
    """Gradient of  -sum_h coef_h * reach_h(y)  with respect to y.

    Multilinear in every coordinate, so this equals the pinned difference
    f(y | y_i = 1) - f(y | y_i = 0).  Uses an exclusive prefix product and a
    backward suffix recurrence so a cached probability of exactly 1 is safe.
    """
    one_minus, prefix = _survival(ctx, y)
    route = 1.0 - y[ctx.n_xi:]
    P, H = one_minus.shape
    before = np.ones_like(prefix)
    before[:, 1:] = prefix[:, :-1]
    tail = np.empty_like(coef)
    if H:
        tail[:, H - 1] = coef[:, H - 1]
        for k in range(H - 2, -1, -1):
            tail[:, k] = coef[:, k] + one_minus[:, k + 1] * tail[:, k + 1]
    d_xi = route[:, None] * before * tail
    grad = np.empty(ctx.dim)
    m = ctx.hop_mask
    grad[:ctx.n_xi] = np.bincount(ctx.hop_xi[m], weights=d_xi[m], minlength=ctx.n_xi)
    grad[ctx.n_xi:] = np.sum(coef * prefix, axis=1)
    return grad


def gradient(ctx: ObjectiveContext, y, psi=None) -> np.ndarray:
    """Exact gradient of the Lagrangian (of the cache gain when ``psi`` is None)."""
    psi = _check_psi(ctx, psi)
    y = _check_dim(ctx, y)
    coef = ctx.path_rate[:, None] * (ctx.hop_weight + psi[ctx.hop_edge]) * ctx.hop_mask
    return _hop_gradient(ctx, y, coef)


def flow_gradient(ctx: ObjectiveContext, y, edge) -> np.ndarray:
    """Gradient of the flow on one edge (all entries are <= 0)."""
    e = _edge_id(ctx, edge)
    y = _check_dim(ctx, y)
    coef = ctx.path_rate[:, None] * ((ctx.hop_edge == e) & ctx.hop_mask)
    return -_hop_gradient(ctx, y, coef)
