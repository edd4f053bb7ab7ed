"""Experiment orchestration: run algorithms over scenario grids and write
result tables and per-iteration traces.

Each grid unit is one generated instance (a scenario spec plus a seed).
Units run in a bounded process pool and carry their own seeds, so the
records do not depend on the number of workers; they are sorted before
they are returned or written.
"""
from __future__ import annotations

import csv
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .baselines import BaselineKind, run_baseline
from .metrics import INF_SENTINEL
from .objective import build_context
from .primal_dual import PDConfig, RunReport, run_primal_dual
from .scenario import ScenarioSpec, build_scenario

log = logging.getLogger(__name__)

ALGORITHMS = ("primaldual",) + tuple(k.value for k in BaselineKind)
ITERATIVE = ("primaldual", "alternating")
THREADS_ENV = "CACHEROUTE_THREADS"

FEASIBLE, INFEASIBLE, ERROR = "feasible", "infeasible", "error"


@dataclass(frozen=True)
class MetricsRecord:
    algorithm: str
    instance_id: str
    kappa: float
    gain: float
    normalized_gain: float
    inf: float
    max_inf: float
    iterations: int
    wall_time: float | None
    status: str

    def __post_init__(self):
        if self.status not in (FEASIBLE, INFEASIBLE, ERROR):
            raise ValueError(f"unknown status {self.status!r}")
        if self.inf < 0 or self.max_inf < 0:
            raise ValueError("infeasibility metrics must be nonnegative")
        if self.inf > self.max_inf:
            raise ValueError("InF exceeds MaxInF")
        if (self.status != FEASIBLE) != (self.inf == INF_SENTINEL):
            raise ValueError("failed status must go with the sentinel InF and vice versa")

    @property
    def key(self) -> tuple:
        return (self.instance_id, self.kappa, ALGORITHMS.index(self.algorithm)
                if self.algorithm in ALGORITHMS else len(ALGORITHMS), self.algorithm)


COLUMNS = tuple(f.name for f in fields(MetricsRecord))


@dataclass(frozen=True)
class ExperimentGrid:
    """Scenario specs crossed with repetitions; every spec gets the same instance seeds.

    Specs that differ only in ``kappa`` therefore share topology, demand and
    the capacity reference strategy, which is what a looseness sweep needs.
    When ``seeds`` is omitted, repetition ``r`` uses a seed derived from
    ``(master_seed, r)``.
    """
    specs: tuple[ScenarioSpec, ...]
    algorithms: tuple[str, ...] = ALGORITHMS
    repetitions: int = 1
    seeds: tuple[int, ...] | None = None
    master_seed: int = 0
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        if not self.specs:
            raise ValueError("grid needs at least one scenario")
        if not self.algorithms:
            raise ValueError("grid needs at least one algorithm")
        unknown = set(self.algorithms) - set(ALGORITHMS)
        if unknown:
            raise ValueError(f"unknown algorithms {sorted(unknown)}")
        if self.repetitions < 1:
            raise ValueError("repetitions must be positive")
        if self.seeds is not None and len(self.seeds) != self.repetitions:
            raise ValueError("need one seed per repetition")
        if self.labels is not None and len(self.labels) != len(self.specs):
            raise ValueError("need one label per scenario")

    def instance_seeds(self) -> list[int]:
        if self.seeds is not None:
            return list(self.seeds)
        return [int(np.random.SeedSequence([self.master_seed, r]).generate_state(1)[0])
                for r in range(self.repetitions)]

    def units(self) -> list[tuple[str, ScenarioSpec]]:
        out = []
        seeds = self.instance_seeds()
        for k, spec in enumerate(self.specs):
            label = self.labels[k] if self.labels else spec.topology
            for seed in seeds:
                out.append((f"{label}-{seed}", replace(spec, seed=seed)))
        return out


@dataclass
class ExperimentResult:
    records: list[MetricsRecord]
    reports: dict[tuple, RunReport] = field(default_factory=dict)


def default_threads() -> int:
    raw = os.environ.get(THREADS_ENV)
    if not raw:
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    return max(1, n)


def _status(report: RunReport) -> str:
    """Infeasible when a routing LP failed or when the run carries the sentinel InF."""
    return FEASIBLE if report.feasible and report.inf < INF_SENTINEL else INFEASIBLE


def record_from_report(report: RunReport, instance_id: str, kappa: float, reference_gain: float | None,
                       include_timing: bool = True) -> MetricsRecord:
    """Metrics row for one run; gains are normalized by ``reference_gain`` when it is positive."""
    status = _status(report)
    if status != FEASIBLE:
        norm = 0.0
    elif reference_gain is not None and reference_gain > 0:
        norm = report.gain / reference_gain
    else:
        norm = math.nan
    return MetricsRecord(report.algorithm, instance_id, float(kappa), float(report.gain), float(norm),
                         float(report.inf), float(report.max_inf), int(report.iterations),
                         float(report.wall_time) if include_timing else None, status)


def _error_record(algorithm: str, instance_id: str, kappa: float) -> MetricsRecord:
    return MetricsRecord(algorithm, instance_id, float(kappa), 0.0, 0.0, INF_SENTINEL, INF_SENTINEL, 0, None, ERROR)


def run_algorithm(algorithm: str, instance, demand, pd: PDConfig = PDConfig(), ctx=None) -> RunReport:
    ctx = ctx or build_context(instance, demand)
    if algorithm == "primaldual":
        return run_primal_dual(instance, demand, pd, ctx=ctx)
    return run_baseline(algorithm, instance, demand, ctx=ctx, fw=pd.fw)


def run_unit(instance_id: str, spec: ScenarioSpec, algorithms, pd: PDConfig = PDConfig(),
             include_timing: bool = True) -> tuple[list[MetricsRecord], dict[tuple, RunReport]]:
    """Generate one instance and run every requested algorithm on it.

    Primal-dual always runs first because its gain normalizes the others.
    """
    try:
        instance, demand = build_scenario(spec)
        ctx = build_context(instance, demand)
    except Exception:
        log.exception("instance %s could not be built", instance_id)
        return [_error_record(a, instance_id, spec.kappa) for a in algorithms], {}
    reports: dict[tuple, RunReport] = {}
    order = ["primaldual"] + [a for a in algorithms if a != "primaldual"]
    for alg in order:
        try:
            reports[(instance_id, spec.kappa, alg)] = run_algorithm(alg, instance, demand, pd, ctx)
        except Exception:
            log.exception("%s failed on %s", alg, instance_id)
    pd_report = reports.get((instance_id, spec.kappa, "primaldual"))
    ref = pd_report.gain if pd_report is not None else None
    records = []
    for alg in algorithms:
        rep = reports.get((instance_id, spec.kappa, alg))
        if rep is None:
            records.append(_error_record(alg, instance_id, spec.kappa))
        else:
            records.append(record_from_report(rep, instance_id, spec.kappa, ref, include_timing))
    kept = {k: v for k, v in reports.items() if k[2] in algorithms}
    return records, kept


def _run_unit_args(args):
    return run_unit(*args)


def run_experiment(grid: ExperimentGrid, threads: int | None = None, pd: PDConfig = PDConfig(),
                   include_timing: bool = True) -> ExperimentResult:
    threads = default_threads() if threads is None else max(1, int(threads))
    jobs = [(iid, spec, tuple(grid.algorithms), pd, include_timing) for iid, spec in grid.units()]
    if threads == 1 or len(jobs) == 1:
        outs = [run_unit(*j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            outs = list(pool.map(_run_unit_args, jobs))
    records, reports = [], {}
    for recs, reps in outs:
        records.extend(recs)
        reports.update(reps)
    records.sort(key=lambda r: r.key)
    return ExperimentResult(records, dict(sorted(reports.items(), key=lambda kv: (kv[0][0], kv[0][1], kv[0][2]))))


# -- output ---------------------------------------------------------------

def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_table(records, path, delimiter: str = ",") -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        w.writerow(COLUMNS)
        for r in records:
            w.writerow([_cell(getattr(r, c)) for c in COLUMNS])
    return path


def read_table(path, delimiter: str | None = None) -> list[MetricsRecord]:
    path = Path(path)
    if delimiter is None:
        delimiter = "\t" if path.suffix == ".tsv" else ","
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh, delimiter=delimiter))
    if not rows or tuple(rows[0]) != COLUMNS:
        raise ValueError(f"{path}: unexpected header {rows[0] if rows else None}")
    out = []
    for row in rows[1:]:
        d = dict(zip(COLUMNS, row))
        out.append(MetricsRecord(
            algorithm=d["algorithm"], instance_id=d["instance_id"], kappa=float(d["kappa"]),
            gain=float(d["gain"]), normalized_gain=float(d["normalized_gain"]), inf=float(d["inf"]),
            max_inf=float(d["max_inf"]), iterations=int(d["iterations"]),
            wall_time=float(d["wall_time"]) if d["wall_time"] else None, status=d["status"]))
    return out


def trace_doc(report: RunReport) -> dict:
    return {
        "algorithm": report.algorithm,
        "columns": ["iteration", "gain", "lagrangian", "inf", "max_inf", "dual_norm"],
        "rows": [[r.t, r.gain, r.lagrangian, r.inf, r.max_inf, r.dual_norm] for r in report.records],
    }


def trace_name(key: tuple) -> str:
    instance_id, kappa, alg = key
    return f"{instance_id}_k{kappa:g}_{alg}.json"


def write_traces(reports: dict[tuple, RunReport], directory, iterative_only: bool = True) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for key, rep in reports.items():
        if iterative_only and key[2] not in ITERATIVE:
            continue
        p = directory / trace_name(key)
        p.write_text(json.dumps(trace_doc(rep), indent=1) + "\n")
        written.append(p)
    return written


def emit_results(records, path, fmt: str = "csv", reports: dict[tuple, RunReport] | None = None,
                 trace_dir=None) -> list[Path]:
    """Write the metrics table (``csv``, ``tsv`` or ``json``) and optional trace files."""
    if not records:
        raise ValueError("no records to write")
    path = Path(path)
    if fmt == "csv":
        out = [write_table(records, path, ",")]
    elif fmt == "tsv":
        out = [write_table(records, path, "\t")]
    elif fmt == "json":
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps({"columns": list(COLUMNS), "records": [asdict(r) for r in records]},
                                   indent=1) + "\n")
        out = [path]
    else:
        raise ValueError(f"unknown format {fmt!r}")
    if reports:
        out += write_traces(reports, trace_dir if trace_dir is not None else path.parent / "traces")
    return out


def read_results(path) -> list[MetricsRecord]:
    path = Path(path)
    if path.suffix == ".json":
        doc = json.loads(path.read_text())
        return [MetricsRecord(**r) for r in doc["records"]]
    return read_table(path)


def sweep_grid(spec: ScenarioSpec, kappas, repetitions: int = 1, master_seed: int = 0,
               algorithms=ALGORITHMS, seeds=None) -> ExperimentGrid:
    """A looseness sweep: the same instances at several capacity multipliers."""
    specs = tuple(replace(spec, kappa=float(k)) for k in kappas)
    return ExperimentGrid(specs, tuple(algorithms), repetitions,
                          tuple(seeds) if seeds is not None else None, master_seed)


__all__ = [
    "ALGORITHMS", "COLUMNS", "ExperimentGrid", "ExperimentResult", "MetricsRecord",
    "default_threads", "emit_results", "read_results", "record_from_report", "run_algorithm",
    "run_experiment", "run_unit", "sweep_grid", "trace_doc", "write_traces",
]
