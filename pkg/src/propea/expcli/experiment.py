"""Replicated experiments, result tables, scaling fits and file output."""

from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from .. import __version__
from ..bitcore import PRNG_NAME, SeedSpec, derive_seed
from ..engine import RunTrace, run, trace_rows
from .config import Cell, ExperimentConfig

CSV_COLUMNS = ("scenario", "n", "lambda", "chi", "c", "selection", "seed", "outcome", "evaluations",
               "best_fitness", "min_zero_bits", "wall_ms", "cell", "replicate", "T_coarse",
               "generations", "min_zero_bits_ever", "fallback_generations")

# Columns that legitimately differ between reruns with the same seed.
NONDETERMINISTIC_COLUMNS = ("wall_ms",)


@dataclass
class ResultRow:
    scenario: str
    n: int
    lam: int
    chi: float
    c: Optional[float]
    selection: str
    seed: int
    outcome: str
    evaluations: int
    best_fitness: float
    min_zero_bits: int
    wall_ms: float
    cell: int
    replicate: int
    T_coarse: Optional[int]
    generations: int
    min_zero_bits_ever: int
    fallback_generations: int

    @property
    def found(self) -> bool:
        return self.outcome == "found"

    def as_csv_dict(self) -> dict:
        d = asdict(self)
        d["lambda"] = d.pop("lam")
        return d

    def deterministic(self) -> tuple:
        d = self.as_csv_dict()
        return tuple(d[k] for k in CSV_COLUMNS if k not in NONDETERMINISTIC_COLUMNS)


@dataclass
class CellAggregate:
    cell: int
    n: int
    lam: int
    chi: float
    runs: int
    successes: int
    censored: int
    success_rate: float
    median_T: Optional[float]
    mean_T: Optional[float]
    median_T_censored_as_inf: float


def aggregate_rows(rows: Sequence[ResultRow]) -> List[CellAggregate]:
    """Per-cell statistics.  Success-only statistics are reported next to the
    censored count; ``median_T_censored_as_inf`` treats censored runs as
    infinitely long."""
    out = []
    for cell in sorted({r.cell for r in rows}):
        rs = [r for r in rows if r.cell == cell]
        Ts = [r.evaluations for r in rs if r.found]
        all_T = [r.evaluations if r.found else math.inf for r in rs]
        out.append(CellAggregate(
            cell=cell, n=rs[0].n, lam=rs[0].lam, chi=rs[0].chi, runs=len(rs), successes=len(Ts),
            censored=len(rs) - len(Ts), success_rate=len(Ts) / len(rs),
            median_T=float(np.median(Ts)) if Ts else None,
            mean_T=float(np.mean(Ts)) if Ts else None,
            median_T_censored_as_inf=float(np.median(all_T)),
        ))
    return out


@dataclass
class ResultTable:
    rows: List[ResultRow] = field(default_factory=list)
    config: dict = field(default_factory=dict)
    traces: List[RunTrace] = field(default_factory=list, repr=False, compare=False)

    @property
    def aggregates(self) -> List[CellAggregate]:
        return aggregate_rows(self.rows)

    def to_json(self) -> str:
        doc = {"artifact": "propea", "version": __version__, "prng": PRNG_NAME, "config": self.config,
               "rows": [asdict(r) for r in self.rows],
               "aggregates": [asdict(a) for a in self.aggregates]}
        return json.dumps(doc, indent=2, default=_json_default)

    @classmethod
    def from_json(cls, text: str) -> "ResultTable":
        doc = json.loads(text)
        return cls(rows=[ResultRow(**r) for r in doc["rows"]], config=doc["config"])


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    raise TypeError(f"not JSON serializable: {type(o)}")


def _run_task(task):
    cell, replicate, seed, scenario, keep_trace = task
    t0 = time.perf_counter()
    trace = run(replace(cell.run_config, seed=seed))
    wall_ms = (time.perf_counter() - t0) * 1000
    last = trace.records[-1]
    row = ResultRow(
        scenario=scenario, n=cell.n, lam=cell.lam, chi=cell.chi, c=cell.c, selection=cell.selection,
        seed=seed, outcome=trace.outcome, evaluations=trace.T if trace.found else trace.evaluations,
        best_fitness=trace.final_best, min_zero_bits=last.min_zero_bits, wall_ms=round(wall_ms, 3),
        cell=cell.index, replicate=replicate, T_coarse=trace.T_coarse, generations=trace.generations,
        min_zero_bits_ever=trace.min_zero_bits_ever, fallback_generations=trace.fallback_generations,
    )
    return row, (trace if keep_trace else None)


def run_experiment(config: ExperimentConfig, workers: Optional[int] = None,
                   keep_traces: bool = False) -> ResultTable:
    """Run every cell x replication.

    Run number ``k`` (cells in order, replicates within a cell) uses seed
    ``derive_seed(base_seed, k)``, so results do not depend on scheduling.
    """
    cells: List[Cell] = config.cells()
    reps = config.replications
    scenario = config["scenario"]
    traces_dir = config["output"].get("traces_dir")
    keep = keep_traces or traces_dir is not None
    tasks = []
    for cell in cells:
        for rep in range(reps):
            k = cell.index * reps + rep
            tasks.append((cell, rep, derive_seed(SeedSpec(config.base_seed, k)), scenario, keep))
    workers = workers if workers is not None else config["workers"]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_run_task, tasks))
    else:
        results = [_run_task(t) for t in tasks]
    table = ResultTable(rows=[r for r, _ in results], config=config.to_dict())
    if keep:
        table.traces = [t for _, t in results]
    if traces_dir is not None:
        emit_traces(table, traces_dir)
    out = config["output"]
    if out.get("csv") or out.get("json"):
        emit_results(table, csv_path=out.get("csv"), json_path=out.get("json"))
    return table


class CensoredCellsError(ValueError):
    pass


@dataclass
class ScalingFit:
    slope: float
    intercept: float
    residual: float
    points: list


def scaling_fit(cells: Sequence[tuple]) -> ScalingFit:
    """Least-squares fit of ``log T = slope * log n + intercept``.

    ``cells`` are ``(n, median_T)`` pairs; a median of None or infinity marks a
    censored cell and makes the fit refuse.
    """
    cells = list(cells)
    if len(cells) < 3:
        raise ValueError("scaling fit needs at least 3 cells")
    bad = [n for n, T in cells if T is None or not math.isfinite(T)]
    if bad:
        raise CensoredCellsError(f"censored cells at n={bad}")
    nonpos = [n for n, T in cells if T <= 0]
    if nonpos:
        raise ValueError(f"non-positive median runtime at n={nonpos}")
    x = np.log([float(n) for n, _ in cells])
    y = np.log([float(T) for _, T in cells])
    A = np.vstack([x, np.ones_like(x)]).T
    (slope, intercept), res, *_ = np.linalg.lstsq(A, y, rcond=None)
    residual = float(np.sqrt(np.mean((A @ [slope, intercept] - y) ** 2)))
    return ScalingFit(float(slope), float(intercept), residual, cells)


def median_runtime_by_n(table: ResultTable) -> List[tuple]:
    """``(n, median T)`` per cell, censored runs counted as infinite."""
    return [(a.n, a.median_T_censored_as_inf) for a in table.aggregates]


def emit_results(table: ResultTable, csv_path=None, json_path=None) -> None:
    if csv_path is not None:
        Path(csv_path).parent.mkdir(parents=True, exist_ok=True)
        with open(csv_path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
            w.writeheader()
            for r in table.rows:
                w.writerow(r.as_csv_dict())
    if json_path is not None:
        Path(json_path).parent.mkdir(parents=True, exist_ok=True)
        Path(json_path).write_text(table.to_json())


def read_csv_rows(path) -> List[ResultRow]:
    conv = {"n": int, "lambda": int, "chi": float, "seed": int, "evaluations": int, "best_fitness": float,
            "min_zero_bits": int, "wall_ms": float, "cell": int, "replicate": int, "generations": int,
            "min_zero_bits_ever": int, "fallback_generations": int}
    rows = []
    with open(path, newline="") as fh:
        for d in csv.DictReader(fh):
            vals = {k: conv[k](v) if k in conv else v for k, v in d.items()}
            vals["c"] = float(d["c"]) if d["c"] else None
            vals["T_coarse"] = int(d["T_coarse"]) if d["T_coarse"] else None
            vals["lam"] = vals.pop("lambda")
            rows.append(ResultRow(**vals))
    return rows


def emit_traces(table: ResultTable, directory) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    for row, trace in zip(table.rows, table.traces):
        rows = trace_rows(trace)
        if not rows:
            continue
        with open(d / f"cell{row.cell:03d}_rep{row.replicate:03d}.csv", "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]))
            w.writeheader()
            w.writerows(rows)
