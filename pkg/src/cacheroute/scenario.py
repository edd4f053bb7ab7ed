"""Synthetic and trace-driven experiment inputs.

Randomness comes from numpy's PCG64 generator seeded through
``SeedSequence(seed)``; separate child streams drive topology, requests
and capacities, so e.g. changing the looseness leaves the topology and the
capacity reference point untouched.
"""
from __future__ import annotations

import heapq
import logging
import warnings
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import networkx as nx
import numpy as np

from .fileio import ParseError, load_instance, parse_json
from .model import DemandModel, NetworkInstance, Request
from .objective import build_context, edge_flows

log = logging.getLogger(__name__)

TOPOLOGIES = ("er", "balanced_tree", "hypercube", "grid", "small_world", "file", "counterexample")


@dataclass(frozen=True)
class ScenarioSpec:
    topology: str = "er"
    n_nodes: int = 100           # er; small_world uses the square root as grid side
    n_links: int = 522           # er: undirected links
    branching: int = 3
    depth: int = 5
    dimension: int = 7
    rows: int = 10
    cols: int = 10
    topology_file: str | None = None
    query_nodes: int = 10
    requests: int = 5000
    max_paths: int = 5
    cache_range: tuple[int, int] = (10, 20)
    weight_range: tuple[int, int] = (1, 100)
    catalog: int = 1000
    zipf: float = 1.2
    stretch: float = 4.0
    kappa: float = 1.0
    seed: int = 0
    reference_routing: str = "uniform"

    def __post_init__(self):
        if self.topology not in TOPOLOGIES:
            raise ValueError(f"unknown topology {self.topology!r}")
        if self.kappa < 1:
            raise ValueError("looseness kappa must be >= 1")
        if self.cache_range[0] < 0 or self.cache_range[0] > self.cache_range[1]:
            raise ValueError("bad cache capacity range")
        if self.weight_range[0] < 0 or self.weight_range[0] > self.weight_range[1]:
            raise ValueError("bad weight range")
        if self.max_paths < 1 or self.stretch < 1:
            raise ValueError("max_paths and stretch must be at least 1")

    def streams(self) -> list[np.random.Generator]:
        return [np.random.default_rng(s) for s in np.random.SeedSequence(self.seed).spawn(3)]


def _graph(spec: ScenarioSpec, rng: np.random.Generator) -> nx.Graph:
    t = spec.topology
    if t == "er":
        for _ in range(1000):
            g = nx.gnm_random_graph(spec.n_nodes, spec.n_links, seed=int(rng.integers(2**32)))
            if nx.is_connected(g):
                return g
        raise RuntimeError("could not draw a connected Erdos-Renyi graph")
    if t == "balanced_tree":
        return nx.balanced_tree(spec.branching, spec.depth)
    if t == "hypercube":
        return nx.convert_node_labels_to_integers(nx.hypercube_graph(spec.dimension), ordering="sorted")
    if t == "grid":
        return nx.convert_node_labels_to_integers(nx.grid_2d_graph(spec.rows, spec.cols), ordering="sorted")
    if t == "small_world":
        side = max(2, int(round(spec.n_nodes ** 0.5)))
        d = nx.navigable_small_world_graph(side, p=1, q=1, r=2, dim=2, seed=int(rng.integers(2**32)))
        g = nx.Graph()
        g.add_nodes_from(sorted(d.nodes()))
        g.add_edges_from(sorted((u, v) for u, v in d.edges() if u != v))
        return nx.convert_node_labels_to_integers(g, ordering="sorted")
    raise ValueError(f"topology {t!r} is not generated")


def generate_topology(spec: ScenarioSpec, rng: np.random.Generator | None = None) -> NetworkInstance:
    """Symmetric graph with random integer weights, cache sizes and one server per item.

    Capacities are left at zero; see :func:`set_link_capacities`.
    """
    rng = rng if rng is not None else spec.streams()[0]
    if spec.topology == "file":
        base, _ = load_instance(spec.topology_file)
        n = base.n_nodes
        links = sorted({tuple(sorted(e)) for e in base.edges})
    else:
        g = _graph(spec, rng)
        n = g.number_of_nodes()
        links = sorted(tuple(sorted(e)) for e in g.edges())
    edges = [e for u, v in links for e in ((u, v), (v, u))]
    lo, hi = spec.weight_range
    weights = rng.integers(lo, hi + 1, size=len(edges)).astype(float)
    caches = rng.integers(spec.cache_range[0], spec.cache_range[1] + 1, size=n)
    servers = [{int(v)} for v in rng.integers(0, n, size=spec.catalog)]
    return NetworkInstance(n, edges, weights, np.zeros(len(edges)), spec.catalog, servers, caches)


def zipf_rates(n: int, exponent: float, rng: np.random.Generator) -> np.ndarray:
    """Rates ``rank ** -exponent`` for a random ranking; the top request gets 1."""
    ranks = rng.permutation(n) + 1
    return ranks.astype(float) ** -exponent


def generate_requests(spec: ScenarioSpec, instance: NetworkInstance,
                      rng: np.random.Generator | None = None) -> list[Request]:
    rng = rng if rng is not None else spec.streams()[1]
    if spec.query_nodes > instance.n_nodes:
        raise ValueError("more query nodes than nodes")
    query = rng.choice(instance.n_nodes, size=spec.query_nodes, replace=False)
    pairs = [(i, int(s)) for i in range(instance.catalog_size) for s in query
             if int(s) not in instance.servers[i]]
    if spec.requests > len(pairs):
        raise ValueError(f"asked for {spec.requests} requests but only {len(pairs)} pairs exist")
    chosen = rng.choice(len(pairs), size=spec.requests, replace=False)
    rates = zipf_rates(spec.requests, spec.zipf, rng)
    return [Request(pairs[k][0], pairs[k][1], lam) for k, lam in zip(chosen, rates)]


def response_graph(instance: NetworkInstance) -> nx.DiGraph:
    """Digraph whose hop (a -> b) costs the response weight w[b, a]."""
    g = nx.DiGraph()
    g.add_nodes_from(range(instance.n_nodes))
    for (a, b), k in instance.edge_index.items():
        g.add_edge(a, b, cost=float(instance.weights[instance.edge_index[(b, a)]]))
    return g


def path_cost(instance: NetworkInstance, path) -> float:
    idx = instance.edge_index
    return float(sum(instance.weights[idx[(b, a)]] for a, b in zip(path[:-1], path[1:])))


def candidate_paths(graph: nx.DiGraph, instance: NetworkInstance, source: int, servers,
                    max_paths: int, stretch: float) -> list[tuple[int, ...]]:
    """Cheapest simple paths to any server, in cost order, within the stretch bound.

    The shortest path is always first.  Paths that touch a server before
    their last node are skipped.
    """
    servers = set(servers)
    gens = []
    for t in sorted(servers):
        if t == source or not nx.has_path(graph, source, t):
            continue
        sub = graph
        others = servers - {t}
        if others:
            sub = graph.subgraph(set(graph.nodes) - others)
        gens.append(((path_cost(instance, p), tuple(p)) for p in
                     nx.shortest_simple_paths(sub, source, t, weight="cost")))
    out: list[tuple[int, ...]] = []
    best = None
    for cost, p in heapq.merge(*gens):
        if best is None:
            best = cost
        if cost > stretch * best * (1 + 1e-12) + 1e-12:
            break
        out.append(p)
        if len(out) >= max_paths:
            break
    return out


def generate_paths(spec: ScenarioSpec, instance: NetworkInstance, requests) -> DemandModel:
    """Attach bounded-stretch path sets; requests with no path are dropped."""
    graph = response_graph(instance)
    kept, path_sets = [], []
    for r in requests:
        ps = candidate_paths(graph, instance, r.source, instance.servers[r.item], spec.max_paths, spec.stretch)
        if not ps:
            log.info("dropping request (item=%d, source=%d): no path", r.item, r.source)
            continue
        kept.append(r)
        path_sets.append(tuple(ps))
    return DemandModel(tuple(kept), tuple(path_sets))


def reference_strategy(instance: NetworkInstance, demand: DemandModel, rng: np.random.Generator,
                       routing: str = "uniform") -> np.ndarray:
    """Random full caches plus an even routing split.

    ``routing="uniform"`` routes each request over its paths with probability
    ``1/|P|`` each; ``"complement"`` instead sets the routing complements to
    ``1/|P|``.
    """
    xi = np.zeros((instance.n_nodes, instance.catalog_size))
    for v in range(instance.n_nodes):
        k = min(int(instance.cache_capacities[v]), instance.catalog_size)
        xi[v, rng.choice(instance.catalog_size, size=k, replace=False)] = 1.0
    sizes = np.array([len(ps) for ps in demand.paths])
    per_path = np.repeat(1.0 / sizes, sizes) if sizes.size else np.zeros(0)
    if routing == "uniform":
        rho_tilde = 1.0 - per_path
    elif routing == "complement":
        rho_tilde = per_path
    else:
        raise ValueError(f"unknown reference routing {routing!r}")
    return np.concatenate([xi.ravel(), rho_tilde])


def set_link_capacities(instance: NetworkInstance, demand: DemandModel, kappa: float,
                        seed=0, routing: str = "uniform") -> NetworkInstance:
    """Capacities equal to ``kappa`` times the flows of a random reference strategy."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    max_p = max((len(ps) for ps in demand.paths), default=1)
    if kappa < 1 or (max_p > 1 and kappa >= max_p):
        warnings.warn(f"kappa={kappa} outside [1, {max_p}): capacities are trivially tight or loose")
    ctx = build_context(instance.with_capacities(np.zeros(instance.n_edges)), demand)
    y_ref = reference_strategy(instance, demand, rng, routing)
    return instance.with_capacities(kappa * edge_flows(ctx, y_ref))


def build_scenario(spec: ScenarioSpec) -> tuple[NetworkInstance, DemandModel]:
    if spec.topology == "counterexample":
        return build_counterexample()
    topo_rng, req_rng, cap_rng = spec.streams()
    inst = generate_topology(spec, topo_rng)
    demand = generate_paths(spec, inst, generate_requests(spec, inst, req_rng))
    inst = set_link_capacities(inst, demand, spec.kappa, cap_rng, spec.reference_routing)
    return inst, demand


def build_counterexample() -> tuple[NetworkInstance, DemandModel]:
    """The certified small instance on which every decoupled baseline fails."""
    text = resources.files("cacheroute").joinpath("data/counterexample.json").read_text()
    return parse_json(text)


# -- traces ---------------------------------------------------------------

@dataclass(frozen=True)
class TraceRecord:
    item: int
    node: int
    count: int

    def __post_init__(self):
        if self.count <= 0:
            raise ValueError("trace counts must be positive")


def parse_trace(text: str) -> list[TraceRecord]:
    """Records ``item_id, node_id, count``, one per line; ``#`` starts a comment."""
    out = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = [p.strip() for p in line.replace(",", " ").split()]
        try:
            if len(parts) != 3:
                raise ValueError("expected 3 fields")
            out.append(TraceRecord(int(parts[0]), int(parts[1]), int(parts[2])))
        except ValueError as exc:
            raise ParseError(f"bad trace record {line!r}: {exc}", lineno) from None
    return out


def format_trace(records) -> str:
    return "".join(f"{r.item}, {r.node}, {r.count}\n" for r in records)


def demand_from_trace(records, instance: NetworkInstance, max_paths: int = 5, stretch: float = 4.0,
                      top_n: int | None = None) -> DemandModel:
    """Rates are counts divided by the largest count; repeated pairs are summed."""
    counts: dict[tuple[int, int], int] = {}
    for r in records:
        if not 0 <= r.item < instance.catalog_size or not 0 <= r.node < instance.n_nodes:
            raise ValueError(f"trace record {r} refers to an unknown item or node")
        if r.node in instance.servers[r.item]:
            continue
        counts[(r.item, r.node)] = counts.get((r.item, r.node), 0) + r.count
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    if top_n is not None:
        ranked = ranked[:top_n]
    if not ranked:
        return DemandModel((), ())
    top = ranked[0][1]
    requests = [Request(i, s, c / top) for (i, s), c in ranked]
    spec = ScenarioSpec(max_paths=max_paths, stretch=stretch)
    return generate_paths(spec, instance, requests)


def load_trace(path, instance: NetworkInstance, scale: float = 1.0, top_n: int | None = None,
               max_paths: int = 5, stretch: float = 4.0) -> tuple[NetworkInstance, DemandModel]:
    records = parse_trace(Path(path).read_text())
    demand = demand_from_trace(records, instance, max_paths, stretch, top_n)
    return instance.with_capacities(instance.capacities * scale), demand


def synthesize_trace(instance: NetworkInstance, n_records: int, query_nodes: int,
                     rng: np.random.Generator, zipf: float = 1.2, max_count: int = 10_000) -> list[TraceRecord]:
    spec = ScenarioSpec(query_nodes=query_nodes, requests=n_records, zipf=zipf)
    reqs = generate_requests(spec, instance, rng)
    return [TraceRecord(r.item, r.source, max(1, int(round(max_count * r.rate)))) for r in reqs]
