"""Search for and certify small instances where every decoupled baseline fails.

A certified instance satisfies all of:

* optimal routing with empty caches is infeasible (Random2 and Greedy2 fail at step 1);
* optimal routing after uniform caching is infeasible (Random1);
* optimal routing after greedy caching is infeasible (Greedy1);
* the alternating heuristic hits an infeasible routing step;
* the primal-dual run converges with zero infeasibility and positive gain.
"""
from __future__ import annotations

import networkx as nx
import numpy as np

from .baselines import alternating, greedy_caching, optimal_routing, uniform_caching
from .model import DemandModel, NetworkInstance, Request
from .objective import build_context, edge_flows
from .primal_dual import PDConfig, run_primal_dual
from .scenario import ScenarioSpec, generate_paths


def certify(instance: NetworkInstance, demand: DemandModel, config: PDConfig = PDConfig()) -> dict[str, bool]:
    ctx = build_context(instance, demand)
    empty = np.zeros((instance.n_nodes, instance.catalog_size))
    checks = {
        "random2_step1_infeasible": not optimal_routing(ctx, empty).optimal,
        "random1_infeasible": not optimal_routing(ctx, uniform_caching(instance, demand)).optimal,
        "greedy1_infeasible": not optimal_routing(ctx, greedy_caching(ctx, np.zeros(ctx.n_paths))).optimal,
    }
    checks["greedy2_step1_infeasible"] = checks["random2_step1_infeasible"]
    checks["alternating_infeasible"] = not alternating(instance, demand, ctx=ctx).feasible
    if all(checks.values()):
        rep = run_primal_dual(instance, demand, config, ctx=ctx)
        checks["primaldual_feasible"] = rep.converged and rep.inf == 0.0 and rep.gain > 0
    else:
        checks["primaldual_feasible"] = False
    return checks


def joint_capacities(instance: NetworkInstance, demand: DemandModel, rng: np.random.Generator,
                     slack: float = 0.1, floor: float = 0.1) -> NetworkInstance:
    """Capacities that a random integral joint strategy satisfies with room to spare.

    The reference fills every cache with random items and sends each request
    down one random candidate path; each edge gets ``(1 + slack)`` times its
    reference flow plus ``floor``, so no edge has zero capacity.
    """
    ctx = build_context(instance.with_capacities(np.zeros(instance.n_edges)), demand)
    xi = np.zeros((instance.n_nodes, instance.catalog_size))
    for v in range(instance.n_nodes):
        k = min(int(instance.cache_capacities[v]), instance.catalog_size)
        xi[v, rng.choice(instance.catalog_size, size=k, replace=False)] = 1.0
    rho_tilde = np.ones(ctx.n_paths)
    offsets = demand.path_offsets()
    for r, ps in enumerate(demand.paths):
        rho_tilde[offsets[r] + int(rng.integers(len(ps)))] = 0.0
    flows = edge_flows(ctx, np.concatenate([xi.ravel(), rho_tilde]))
    return instance.with_capacities((1.0 + slack) * flows + floor)


def random_candidate(rng: np.random.Generator, n_nodes: int = 7, n_links: int = 8, catalog: int = 2,
                     n_requests: int = 3, slack: float = 0.1, floor: float = 0.1
                     ) -> tuple[NetworkInstance, DemandModel] | None:
    """A small random instance shaped like the hand-built examples (caches of size 0-1)."""
    for _ in range(100):
        g = nx.gnm_random_graph(n_nodes, n_links, seed=int(rng.integers(2**32)))
        if nx.is_connected(g):
            break
    else:
        return None
    links = sorted(tuple(sorted(e)) for e in g.edges())
    edges = [e for u, v in links for e in ((u, v), (v, u))]
    weights = rng.integers(1, 101, size=len(edges)).astype(float)
    caches = rng.integers(0, 2, size=n_nodes)
    servers = [{int(v)} for v in rng.choice(n_nodes, size=catalog, replace=False)]
    inst = NetworkInstance(n_nodes, edges, weights, np.zeros(len(edges)), catalog, servers, caches)
    pairs = [(i, s) for i in range(catalog) for s in range(n_nodes) if s not in servers[i]]
    pick = rng.choice(len(pairs), size=n_requests, replace=False)
    rates = np.round(rng.uniform(0.2, 1.0, size=n_requests), 2)
    reqs = [Request(pairs[k][0], pairs[k][1], float(lam)) for k, lam in zip(pick, rates)]
    demand = generate_paths(ScenarioSpec(max_paths=2, stretch=4.0), inst, reqs)
    if demand.n_requests < n_requests:
        return None
    return joint_capacities(inst, demand, rng, slack, floor), demand


def search(seed: int = 0, attempts: int = 20000, config: PDConfig = PDConfig(),
           **kwargs) -> tuple[NetworkInstance, DemandModel, int] | None:
    """Return the first certified random candidate and the attempt index."""
    rng = np.random.default_rng(seed)
    for k in range(attempts):
        cand = random_candidate(rng, **kwargs)
        if cand is None:
            continue
        if all(certify(*cand, config).values()):
            return cand[0], cand[1], k
    return None
