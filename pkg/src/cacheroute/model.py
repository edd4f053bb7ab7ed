"""Network, demand and strategy data model plus feasibility checks.

Coordinate layout used everywhere in the package: the primal vector ``y``
is ``xi`` flattened row-major by (node, item), followed by ``rho_tilde``
ordered by request, then by path within the request.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

EQ_TOL = 1e-9


class ModelError(ValueError):
    """Structurally invalid network, demand or strategy."""


class PathError(ModelError):
    """A path violates one of the well-routedness conditions."""


class DimensionError(ModelError):
    """Strategy vector does not match the instance/demand layout."""


def _frozen(a, dtype) -> np.ndarray:
    out = np.array(a, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class NetworkInstance:
    """Directed symmetric graph with edge costs, link capacities and caches.

    ``edges[k] = (u, v)`` has cost ``weights[k]`` and capacity
    ``capacities[k]``.  ``servers[i]`` is the designated-server set of item i.
    """

    n_nodes: int
    edges: tuple[tuple[int, int], ...]
    weights: np.ndarray
    capacities: np.ndarray
    catalog_size: int
    servers: tuple[frozenset[int], ...]
    cache_capacities: np.ndarray
    edge_index: dict[tuple[int, int], int] = field(init=False, repr=False)

    def __post_init__(self):
        edges = tuple((int(u), int(v)) for u, v in self.edges)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "weights", _frozen(self.weights, float))
        object.__setattr__(self, "capacities", _frozen(self.capacities, float))
        object.__setattr__(self, "cache_capacities", _frozen(self.cache_capacities, np.int64))
        object.__setattr__(self, "servers", tuple(frozenset(int(v) for v in s) for s in self.servers))
        n, m = self.n_nodes, len(edges)
        if n < 1:
            raise ModelError("network needs at least one node")
        if self.weights.shape != (m,) or self.capacities.shape != (m,):
            raise ModelError("weights/capacities must have one entry per edge")
        if self.cache_capacities.shape != (n,):
            raise ModelError("cache_capacities must have one entry per node")
        if len(self.servers) != self.catalog_size:
            raise ModelError("every item needs a designated-server set")
        index = {}
        for k, (u, v) in enumerate(edges):
            if not (0 <= u < n and 0 <= v < n) or u == v:
                raise ModelError(f"bad edge ({u}, {v})")
            if (u, v) in index:
                raise ModelError(f"duplicate edge ({u}, {v})")
            index[(u, v)] = k
        for u, v in edges:
            if (v, u) not in index:
                raise ModelError(f"graph is not symmetric: ({u}, {v}) has no reverse edge")
        if np.any(self.weights < 0) or np.any(self.capacities < 0):
            raise ModelError("edge weights and capacities must be nonnegative")
        if np.any(self.cache_capacities < 0):
            raise ModelError("cache capacities must be nonnegative")
        for i, s in enumerate(self.servers):
            if not s:
                raise ModelError(f"item {i} has no designated server")
            if any(not 0 <= v < n for v in s):
                raise ModelError(f"item {i} has a server outside the graph")
        object.__setattr__(self, "edge_index", index)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def n_xi(self) -> int:
        return self.n_nodes * self.catalog_size

    def with_capacities(self, capacities) -> "NetworkInstance":
        return NetworkInstance(self.n_nodes, self.edges, self.weights, capacities,
                               self.catalog_size, self.servers, self.cache_capacities)

    def neighbors(self) -> list[list[int]]:
        adj: list[list[int]] = [[] for _ in range(self.n_nodes)]
        for u, v in self.edges:
            adj[u].append(v)
        return adj


@dataclass(frozen=True)
class Request:
    item: int
    source: int
    rate: float


@dataclass(frozen=True, eq=False)
class DemandModel:
    """Requests (item, source, rate) and their candidate path sets."""

    requests: tuple[Request, ...]
    paths: tuple[tuple[tuple[int, ...], ...], ...]

    def __post_init__(self):
        reqs = tuple(Request(int(r.item), int(r.source), float(r.rate)) for r in self.requests)
        paths = tuple(tuple(tuple(int(v) for v in p) for p in ps) for ps in self.paths)
        object.__setattr__(self, "requests", reqs)
        object.__setattr__(self, "paths", paths)
        if len(paths) != len(reqs):
            raise ModelError("need one path set per request")
        seen = set()
        for r in reqs:
            if not 0.0 <= r.rate <= 1.0:
                raise ModelError(f"request rate {r.rate} outside [0, 1]")
            if (r.item, r.source) in seen:
                raise ModelError(f"duplicate request (item={r.item}, source={r.source})")
            seen.add((r.item, r.source))

    def __eq__(self, other):
        if not isinstance(other, DemandModel):
            return NotImplemented
        return self.requests == other.requests and self.paths == other.paths

    def __hash__(self):
        return hash((self.requests, self.paths))

    @property
    def n_requests(self) -> int:
        return len(self.requests)

    @property
    def n_paths(self) -> int:
        return sum(len(ps) for ps in self.paths)

    def path_offsets(self) -> np.ndarray:
        """Start of each request's block inside ``rho_tilde`` (length R + 1)."""
        return np.concatenate([[0], np.cumsum([len(ps) for ps in self.paths])]).astype(np.int64)

    def rates(self) -> np.ndarray:
        return np.array([r.rate for r in self.requests], dtype=float)


def check_path(instance: NetworkInstance, request: Request, path: Sequence[int]) -> None:
    """Raise PathError unless ``path`` is well-routed for ``request``."""
    servers = instance.servers[request.item] if 0 <= request.item < instance.catalog_size else None
    if servers is None:
        raise PathError(f"item {request.item} not in catalog")
    if not path:
        raise PathError("empty path")
    if path[0] != request.source:
        raise PathError(f"path {tuple(path)} does not start at source {request.source}")
    if len(set(path)) != len(path):
        raise PathError(f"path {tuple(path)} is not simple")
    if path[-1] not in servers:
        raise PathError(f"path {tuple(path)} does not end at a designated server of item {request.item}")
    if any(v in servers for v in path[:-1]):
        raise PathError(f"path {tuple(path)} passes a designated server of item {request.item} early")
    for a, b in zip(path[:-1], path[1:]):
        if (a, b) not in instance.edge_index:
            raise PathError(f"path {tuple(path)} uses missing edge ({a}, {b})")


def check_demand(instance: NetworkInstance, demand: DemandModel) -> None:
    for r, ps in zip(demand.requests, demand.paths):
        if not 0 <= r.source < instance.n_nodes:
            raise ModelError(f"request source {r.source} outside the graph")
        if not ps:
            raise PathError(f"request (item={r.item}, source={r.source}) has no path")
        for p in ps:
            check_path(instance, r, p)


@dataclass(frozen=True, eq=False)
class StrategyPair:
    """Caching marginals ``xi`` (|V| x |C|) and routing complements ``rho_tilde``."""

    xi: np.ndarray
    rho_tilde: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "xi", _frozen(self.xi, float))
        object.__setattr__(self, "rho_tilde", _frozen(self.rho_tilde, float))
        if self.xi.ndim != 2 or self.rho_tilde.ndim != 1:
            raise DimensionError("xi must be 2-D and rho_tilde 1-D")

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([self.xi.ravel(), self.rho_tilde])

    @classmethod
    def from_vector(cls, y, n_nodes: int, catalog_size: int) -> "StrategyPair":
        y = np.asarray(y, dtype=float)
        n_xi = n_nodes * catalog_size
        if y.ndim != 1 or y.size < n_xi:
            raise DimensionError("vector too short for the caching block")
        return cls(y[:n_xi].reshape(n_nodes, catalog_size), y[n_xi:])

    @classmethod
    def zeros(cls, instance: NetworkInstance, demand: DemandModel) -> "StrategyPair":
        return cls(np.zeros((instance.n_nodes, instance.catalog_size)), np.zeros(demand.n_paths))


@dataclass(frozen=True)
class DualVector:
    psi: np.ndarray

    def __post_init__(self):
        psi = _frozen(self.psi, float)
        if np.any(psi < 0) or not np.all(np.isfinite(psi)):
            raise ModelError("dual multipliers must be finite and nonnegative")
        object.__setattr__(self, "psi", psi)


@dataclass(frozen=True)
class ConstraintCheck:
    ok: bool
    violation: float
    index: int | None


@dataclass(frozen=True)
class FeasibilityReport:
    box: ConstraintCheck
    cache: ConstraintCheck
    routing: ConstraintCheck
    set_kind: str

    @property
    def ok(self) -> bool:
        return self.box.ok and self.cache.ok and self.routing.ok


def _worst(viol: np.ndarray, tol: float) -> ConstraintCheck:
    if viol.size == 0:
        return ConstraintCheck(True, 0.0, None)
    k = int(np.argmax(viol))
    v = float(max(viol[k], 0.0))
    return ConstraintCheck(v <= tol, v, k if v > 0 else None)


def as_vector(y) -> np.ndarray:
    if isinstance(y, StrategyPair):
        return y.vector
    return np.asarray(y, dtype=float)


def validate_strategy(instance: NetworkInstance, demand: DemandModel, y,
                      set_kind: str = "D", tol: float = EQ_TOL) -> FeasibilityReport:
    """Check box, cache-capacity and routing constraints.

    ``set_kind`` is ``"D"`` (routing sums bind exactly) or ``"D'"`` (the
    down-closed relaxation, routing sums only bounded from below).
    """
    if set_kind not in ("D", "D'"):
        raise ValueError(f"unknown set kind {set_kind!r}")
    y = as_vector(y)
    n_xi = instance.n_xi
    if y.shape != (n_xi + demand.n_paths,):
        raise DimensionError(f"expected {n_xi + demand.n_paths} coordinates, got {y.shape}")
    box = _worst(np.maximum(-y, y - 1.0), tol)
    xi = y[:n_xi].reshape(instance.n_nodes, instance.catalog_size)
    cache = _worst(xi.sum(axis=1) - instance.cache_capacities, tol)
    off = demand.path_offsets()
    rho_sum = np.add.reduceat(1.0 - y[n_xi:], off[:-1]) if demand.n_requests else np.zeros(0)
    if set_kind == "D":
        routing = _worst(np.abs(rho_sum - 1.0), tol)
    else:
        routing = _worst(1.0 - rho_sum, tol)
    return FeasibilityReport(box, cache, routing, set_kind)


def route_complement(rho) -> np.ndarray:
    """Map routing marginals to their complements (and back: it is an involution)."""
    rho = np.asarray(rho, dtype=float)
    if np.any(rho < 0) or np.any(rho > 1) or np.any(np.isnan(rho)):
        raise ValueError("routing marginals must lie in [0, 1]")
    return 1.0 - rho


def path_position(path: Sequence[int], v: int) -> int:
    """1-based position of node ``v`` on ``path``."""
    try:
        return list(path).index(v) + 1
    except ValueError:
        raise ValueError(f"node {v} is not on path {tuple(path)}") from None


def response_edges(path: Sequence[int]) -> Iterable[tuple[int, int]]:
    """Edges loaded by responses along ``path``: (p[k+1], p[k]) for each hop."""
    return zip(path[1:], path[:-1])
