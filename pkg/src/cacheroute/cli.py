"""Command-line entry point.

    cacheroute [--seed N] [--threads N] [--out PATH] generate [scenario options]
    cacheroute solve --algorithm primaldual [--instance FILE | scenario options]
    cacheroute evaluate --instance FILE --strategy FILE
    cacheroute sweep --kappas 1 1.5 2 3 [--repetitions R] [scenario options]

Infeasible results are data and still exit with status 0; malformed input
or arguments exit with status 2.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .fileio import load_instance, load_strategy, save_instance, save_strategy
from .frankwolfe import FWConfig
from .harness import (ALGORITHMS, default_threads, emit_results, record_from_report, run_algorithm,
                      run_experiment, sweep_grid, trace_doc)
from .metrics import compute_inf
from .model import ModelError, validate_strategy
from .objective import build_context, cache_gain
from .primal_dual import PDConfig
from .scenario import TOPOLOGIES, ScenarioSpec, build_scenario, load_trace

log = logging.getLogger("cacheroute")


def _scenario_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("scenario")
    d = ScenarioSpec()
    g.add_argument("--topology", choices=TOPOLOGIES, default=d.topology)
    g.add_argument("--nodes", type=int, default=d.n_nodes, help="node count (er, small_world)")
    g.add_argument("--links", type=int, default=d.n_links, help="undirected link count (er)")
    g.add_argument("--branching", type=int, default=d.branching)
    g.add_argument("--depth", type=int, default=d.depth)
    g.add_argument("--dimension", type=int, default=d.dimension)
    g.add_argument("--rows", type=int, default=d.rows)
    g.add_argument("--cols", type=int, default=d.cols)
    g.add_argument("--topology-file", default=None, help="instance file whose graph is reused (topology=file)")
    g.add_argument("--query-nodes", type=int, default=d.query_nodes)
    g.add_argument("--requests", type=int, default=d.requests)
    g.add_argument("--max-paths", type=int, default=d.max_paths)
    g.add_argument("--cache-range", type=int, nargs=2, default=list(d.cache_range), metavar=("LO", "HI"))
    g.add_argument("--weight-range", type=int, nargs=2, default=list(d.weight_range), metavar=("LO", "HI"))
    g.add_argument("--catalog", type=int, default=d.catalog)
    g.add_argument("--zipf", type=float, default=d.zipf)
    g.add_argument("--stretch", type=float, default=d.stretch)
    g.add_argument("--kappa", type=float, default=d.kappa)
    g.add_argument("--reference-routing", choices=("uniform", "complement"), default=d.reference_routing)
    g.add_argument("--trace", default=None, help="request trace (item, node, count) replacing synthetic demand")
    g.add_argument("--trace-scale", type=float, default=1.0, help="capacity multiplier applied with --trace")
    g.add_argument("--top-n", type=int, default=None, help="keep only the N most frequent trace pairs")


def _solver_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("solver")
    d = PDConfig()
    g.add_argument("--max-iterations", type=int, default=d.max_iterations)
    g.add_argument("--dual-scale", type=float, default=None, help="c in the dual step c/sqrt(t); adaptive if omitted")
    g.add_argument("--fw-iterations", type=int, default=d.fw.iterations, help="Frank-Wolfe steps per solve")
    g.add_argument("--no-momentum", action="store_true", help="take the Frank-Wolfe point directly each round")
    g.add_argument("--no-early-stop", action="store_true", help="run all iterations even after convergence")
    g.add_argument("--timing", action="store_true", help="record wall-clock time (makes outputs nondeterministic)")


def spec_from_args(args) -> ScenarioSpec:
    return ScenarioSpec(
        topology=args.topology, n_nodes=args.nodes, n_links=args.links, branching=args.branching,
        depth=args.depth, dimension=args.dimension, rows=args.rows, cols=args.cols,
        topology_file=args.topology_file, query_nodes=args.query_nodes, requests=args.requests,
        max_paths=args.max_paths, cache_range=tuple(args.cache_range), weight_range=tuple(args.weight_range),
        catalog=args.catalog, zipf=args.zipf, stretch=args.stretch, kappa=args.kappa, seed=args.seed,
        reference_routing=args.reference_routing)


def pd_config_from_args(args) -> PDConfig:
    return PDConfig(max_iterations=args.max_iterations, dual_scale=args.dual_scale,
                    momentum=not args.no_momentum, stop_on_convergence=not args.no_early_stop,
                    fw=FWConfig(iterations=args.fw_iterations))


def scenario_from_args(args):
    spec = spec_from_args(args)
    instance, demand = build_scenario(spec)
    if args.trace:
        instance, demand = load_trace(args.trace, instance, args.trace_scale, args.top_n,
                                      args.max_paths, args.stretch)
    return instance, demand


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cacheroute", description="Joint caching and routing under link capacities.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    ap.add_argument("--threads", type=int, default=None,
                    help="worker processes for sweeps (default: $CACHEROUTE_THREADS or 1)")
    ap.add_argument("--out", default=None, help="output file (generate) or directory (other commands)")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a generated instance file (.json or text)")
    _scenario_args(p)

    p = sub.add_parser("solve", help="run one algorithm and write strategy, metrics and trace")
    p.add_argument("--algorithm", choices=ALGORITHMS, default="primaldual")
    p.add_argument("--instance", default=None, help="instance file; otherwise generate from scenario options")
    _scenario_args(p)
    _solver_args(p)

    p = sub.add_parser("evaluate", help="metrics of a saved strategy on an instance")
    p.add_argument("--instance", required=True)
    p.add_argument("--strategy", required=True)

    p = sub.add_parser("sweep", help="all algorithms over several looseness values and seeds")
    p.add_argument("--kappas", type=float, nargs="+", default=[1.0, 1.5, 2.0, 3.0])
    p.add_argument("--repetitions", type=int, default=1)
    p.add_argument("--algorithms", nargs="+", choices=ALGORITHMS, default=list(ALGORITHMS))
    p.add_argument("--format", choices=("csv", "tsv", "json"), default="csv")
    _scenario_args(p)
    _solver_args(p)
    return ap


def _out_dir(args, default: str) -> Path:
    d = Path(args.out or default)
    d.mkdir(parents=True, exist_ok=True)
    return d


def cmd_generate(args) -> int:
    instance, demand = scenario_from_args(args)
    out = Path(args.out or "instance.json")
    out.parent.mkdir(parents=True, exist_ok=True)
    save_instance(out, instance, demand)
    print(f"wrote {out}: {instance.n_nodes} nodes, {instance.n_edges} edges, "
          f"{demand.n_requests} requests, {demand.n_paths} paths")
    return 0


def cmd_solve(args) -> int:
    if args.instance:
        instance, demand = load_instance(args.instance)
        iid = Path(args.instance).stem
    else:
        instance, demand = scenario_from_args(args)
        iid = f"{args.topology}-{args.seed}"
    ctx = build_context(instance, demand)
    report = run_algorithm(args.algorithm, instance, demand, pd_config_from_args(args), ctx)
    out = _out_dir(args, "results")
    rec = record_from_report(report, iid, args.kappa if not args.instance else float("nan"),
                             report.gain if args.algorithm == "primaldual" else None, args.timing)
    emit_results([rec], out / "metrics.csv")
    (out / "trace.json").write_text(json.dumps(trace_doc(report), indent=1) + "\n")
    if report.strategy is not None:
        save_strategy(out / "strategy.json", report.strategy)
    print(f"{args.algorithm}: status={rec.status} gain={rec.gain:.6g} InF={rec.inf:.6g} "
          f"MaxInF={rec.max_inf:.6g} iterations={rec.iterations} -> {out}")
    return 0


def cmd_evaluate(args) -> int:
    instance, demand = load_instance(args.instance)
    strategy = load_strategy(args.strategy)
    ctx = build_context(instance, demand)
    y = np.clip(strategy.vector, 0.0, 1.0)
    if not np.array_equal(y, strategy.vector):
        raise ModelError("strategy has entries outside [0, 1]")
    inf, max_inf = compute_inf(ctx, y)
    feas = validate_strategy(instance, demand, y, "D")
    doc = {"gain": float(cache_gain(ctx, y)), "inf": inf, "max_inf": max_inf, "in_strategy_set": feas.ok,
           "cache_violation": feas.cache.violation, "routing_violation": feas.routing.violation}
    text = json.dumps(doc, indent=1) + "\n"
    if args.out:
        out = _out_dir(args, "results")
        (out / "evaluation.json").write_text(text)
    sys.stdout.write(text)
    return 0


def cmd_sweep(args) -> int:
    spec = spec_from_args(args)
    if args.trace:
        raise ModelError("--trace is only supported by generate and solve")
    grid = sweep_grid(spec, args.kappas, args.repetitions, args.seed, tuple(args.algorithms))
    threads = args.threads if args.threads is not None else default_threads()
    result = run_experiment(grid, threads, pd_config_from_args(args), include_timing=args.timing)
    out = _out_dir(args, "results")
    table = out / f"results.{args.format}"
    files = emit_results(result.records, table, args.format, result.reports, out / "traces")
    print(f"wrote {len(result.records)} records to {table} and {len(files) - 1} trace files")
    return 0


COMMANDS = {"generate": cmd_generate, "solve": cmd_solve, "evaluate": cmd_evaluate, "sweep": cmd_sweep}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=[logging.WARNING, logging.INFO, logging.DEBUG][min(args.verbose, 2)],
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads is not None and args.threads < 1:
        print("cacheroute: error: --threads must be positive", file=sys.stderr)
        return 2
    try:
        return COMMANDS[args.command](args)
    except (ModelError, ValueError, OSError) as exc:
        print(f"cacheroute: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
