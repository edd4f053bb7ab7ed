"""Reading and writing instances, demand and strategies.

Two equivalent instance formats are supported.

Line-oriented text (``#`` starts a comment, blank lines ignored)::

    nodes 4
    catalog 2
    edge <u> <v> <weight> <capacity>      # one line per directed edge
    cache <v> <c_v>                       # nodes without a line get 0
    server <item> <v>                     # repeat for several servers
    request <item> <source> <rate>        # requests are indexed in file order
    path <request_index> <v1> <v2> ... <vk>

JSON: an object with keys ``nodes``, ``catalog``, ``edges``
(``[[u, v, weight, capacity], ...]``), ``caches`` (``[[v, c_v], ...]``),
``servers`` (``[[item, v], ...]``), ``requests`` (``[[item, source, rate], ...]``)
and ``paths`` (``[[request_index, v1, ..., vk], ...]``).

Every path is checked for well-routedness at load time.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .model import (DemandModel, ModelError, NetworkInstance, Request, StrategyPair,
                    check_demand)


class ParseError(ModelError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


def _fmt(x: float) -> str:
    return repr(float(x))


def _build(n_nodes, catalog, edges, caches, servers, requests, paths):
    cache_caps = np.zeros(n_nodes, dtype=np.int64)
    for v, c in caches:
        if not 0 <= v < n_nodes:
            raise ParseError(f"cache record for unknown node {v}")
        cache_caps[v] = c
    server_sets: list[set[int]] = [set() for _ in range(catalog)]
    for i, v in servers:
        if not 0 <= i < catalog:
            raise ParseError(f"server record for unknown item {i}")
        server_sets[i].add(v)
    instance = NetworkInstance(
        n_nodes=n_nodes,
        edges=[(u, v) for u, v, _, _ in edges],
        weights=[w for _, _, w, _ in edges],
        capacities=[mu for _, _, _, mu in edges],
        catalog_size=catalog,
        servers=server_sets,
        cache_capacities=cache_caps,
    )
    path_sets: list[list[tuple[int, ...]]] = [[] for _ in requests]
    for r, nodes in paths:
        if not 0 <= r < len(requests):
            raise ParseError(f"path refers to unknown request {r}")
        path_sets[r].append(tuple(nodes))
    demand = DemandModel(tuple(Request(i, s, lam) for i, s, lam in requests),
                         tuple(tuple(ps) for ps in path_sets))
    check_demand(instance, demand)
    return instance, demand


def parse_text(text: str) -> tuple[NetworkInstance, DemandModel]:
    n_nodes = catalog = None
    edges, caches, servers, requests, paths = [], [], [], [], []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, *args = line.split()
        try:
            if key == "nodes" and len(args) == 1:
                n_nodes = int(args[0])
            elif key == "catalog" and len(args) == 1:
                catalog = int(args[0])
            elif key == "edge" and len(args) == 4:
                edges.append((int(args[0]), int(args[1]), float(args[2]), float(args[3])))
            elif key == "cache" and len(args) == 2:
                caches.append((int(args[0]), int(args[1])))
            elif key == "server" and len(args) == 2:
                servers.append((int(args[0]), int(args[1])))
            elif key == "request" and len(args) == 3:
                requests.append((int(args[0]), int(args[1]), float(args[2])))
            elif key == "path" and len(args) >= 2:
                paths.append((int(args[0]), [int(a) for a in args[1:]]))
            else:
                raise ParseError(f"malformed record {line!r}", lineno)
        except ValueError as exc:
            if isinstance(exc, ParseError):
                raise
            raise ParseError(f"malformed record {line!r}: {exc}", lineno) from None
    if n_nodes is None or catalog is None:
        raise ParseError("missing 'nodes' or 'catalog' record")
    return _build(n_nodes, catalog, edges, caches, servers, requests, paths)


def parse_json(text: str) -> tuple[NetworkInstance, DemandModel]:
    try:
        doc = json.loads(text)
        return _build(
            int(doc["nodes"]), int(doc["catalog"]),
            [(int(u), int(v), float(w), float(mu)) for u, v, w, mu in doc["edges"]],
            [(int(v), int(c)) for v, c in doc.get("caches", [])],
            [(int(i), int(v)) for i, v in doc["servers"]],
            [(int(i), int(s), float(lam)) for i, s, lam in doc.get("requests", [])],
            [(int(p[0]), [int(v) for v in p[1:]]) for p in doc.get("paths", [])],
        )
    except (KeyError, TypeError, json.JSONDecodeError) as exc:
        raise ParseError(f"malformed JSON instance: {exc}") from None


def format_text(instance: NetworkInstance, demand: DemandModel) -> str:
    out = [f"nodes {instance.n_nodes}", f"catalog {instance.catalog_size}"]
    for (u, v), w, mu in zip(instance.edges, instance.weights, instance.capacities):
        out.append(f"edge {u} {v} {_fmt(w)} {_fmt(mu)}")
    for v, c in enumerate(instance.cache_capacities):
        if c:
            out.append(f"cache {v} {int(c)}")
    for i, s in enumerate(instance.servers):
        for v in sorted(s):
            out.append(f"server {i} {v}")
    for r in demand.requests:
        out.append(f"request {r.item} {r.source} {_fmt(r.rate)}")
    for k, ps in enumerate(demand.paths):
        for p in ps:
            out.append("path " + " ".join(str(x) for x in (k, *p)))
    return "\n".join(out) + "\n"


def to_json_doc(instance: NetworkInstance, demand: DemandModel) -> dict:
    return {
        "nodes": instance.n_nodes,
        "catalog": instance.catalog_size,
        "edges": [[u, v, float(w), float(mu)] for (u, v), w, mu
                  in zip(instance.edges, instance.weights, instance.capacities)],
        "caches": [[v, int(c)] for v, c in enumerate(instance.cache_capacities) if c],
        "servers": [[i, v] for i, s in enumerate(instance.servers) for v in sorted(s)],
        "requests": [[r.item, r.source, r.rate] for r in demand.requests],
        "paths": [[k, *p] for k, ps in enumerate(demand.paths) for p in ps],
    }


def load_instance(path) -> tuple[NetworkInstance, DemandModel]:
    path = Path(path)
    text = path.read_text()
    if path.suffix == ".json":
        return parse_json(text)
    return parse_text(text)


def save_instance(path, instance: NetworkInstance, demand: DemandModel) -> None:
    path = Path(path)
    if path.suffix == ".json":
        path.write_text(json.dumps(to_json_doc(instance, demand), indent=1) + "\n")
    else:
        path.write_text(format_text(instance, demand))


def strategy_to_doc(y: StrategyPair) -> dict:
    return {"xi": y.xi.tolist(), "rho_tilde": y.rho_tilde.tolist()}


def strategy_from_doc(doc: dict) -> StrategyPair:
    xi = np.array(doc["xi"], dtype=float)
    if xi.ndim == 1 and xi.size == 0:
        xi = xi.reshape(0, 0)
    return StrategyPair(xi, np.array(doc["rho_tilde"], dtype=float).reshape(-1))


def save_strategy(path, y: StrategyPair) -> None:
    Path(path).write_text(json.dumps(strategy_to_doc(y)) + "\n")


def load_strategy(path) -> StrategyPair:
    return strategy_from_doc(json.loads(Path(path).read_text()))
