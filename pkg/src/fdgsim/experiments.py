"""Experiment grids and their on-disk reports.

Every grid writes three files into the output directory:

``<name>_metrics.csv``
    one row per (cell, seed, held-out domain, round, client) with header
    ``cell,seed,held_out,round,client_id,steps,local_loss,nll,smooth,global_acc``
``<name>_summary.json``
    ``{cell: {domain: mean_acc, "ave": mean}}`` using final-round accuracy
    averaged over seeds
``<name>_summary.csv``
    the same numbers as a table, one row per cell

Files are written under a ``.tmp`` name and renamed once everything is
complete. Floats are written with 17 significant digits.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Sequence

from . import domains
from .config import ABLATION_CELLS, RunConfig
from .federation import ExperimentResult, FedConfig, run_experiment

log = logging.getLogger(__name__)

CSV_HEADER = (
    "cell", "seed", "held_out", "round", "client_id",
    "steps", "local_loss", "nll", "smooth", "global_acc",
)
AVE = "ave"


@dataclass(frozen=True)
class Cell:
    cell_id: str
    fed: FedConfig


@dataclass(frozen=True)
class Record:
    cell_id: str
    seed: int
    result: ExperimentResult


def ablation_cells(rc: RunConfig) -> list[Cell]:
    cells = []
    for cell_id in rc.ablation_grid:
        smoothing, budget = ABLATION_CELLS[cell_id]
        cells.append(Cell(cell_id, replace(rc.fed, smoothing_enabled=smoothing, budget_enabled=budget)))
    return cells


def sensitivity_cells(rc: RunConfig) -> list[Cell]:
    """Smoothing sweep with the budget off, then budget sweep with smoothing off."""
    if not rc.epsilon_grid or not rc.budget_grid:
        raise ValueError("sensitivity grids must be non-empty")
    cells = [
        Cell(f"eps={eps:g}", replace(rc.fed, epsilon=eps, smoothing_enabled=True, budget_enabled=False))
        for eps in rc.epsilon_grid
    ]
    cells += [
        Cell(f"S={b.text}", replace(rc.fed, budget_S=b.samples, budget_enabled=True, smoothing_enabled=False))
        for b in rc.budget_grid
    ]
    return cells


def _run_job(job: tuple[Cell, domains.SyntheticTaskSpec, int]) -> Record:
    cell, task_spec, seed = job
    task = domains.generate_task(task_spec, seed)
    result = run_experiment(task, replace(cell.fed, master_seed=seed))
    log.info("cell %s seed %d: ave %.4f", cell.cell_id, seed, result.mean_final)
    return Record(cell.cell_id, seed, result)


def run_cells(
    cells: Sequence[Cell], task_spec: domains.SyntheticTaskSpec, seeds: Sequence[int], jobs: int = 1
) -> list[Record]:
    """Run every (cell, seed) pair; results come back in grid order."""
    work = [(cell, task_spec, seed) for cell in cells for seed in seeds]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_run_job, work))
    return [_run_job(w) for w in work]


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def metric_rows(record: Record) -> Iterable[list[str]]:
    for outcome in record.result.outcomes:
        for report in outcome.rounds:
            for c in report.clients:
                yield [
                    record.cell_id, str(record.seed), outcome.held_out, str(report.round_index),
                    str(c.client_id), str(c.steps_taken), _fmt(c.mean_local_loss),
                    _fmt(c.nll_part), _fmt(c.smooth_part), _fmt(report.global_acc),
                ]


def summarize(records: Sequence[Record]) -> dict[str, dict[str, float]]:
    """Final-round held-out accuracy per cell and domain, averaged over seeds."""
    per_cell: dict[str, dict[str, list[float]]] = {}
    for rec in records:
        cell = per_cell.setdefault(rec.cell_id, {})
        for o in rec.result.outcomes:
            cell.setdefault(o.held_out, []).append(o.final_acc)
    summary = {}
    for cell_id, by_domain in per_cell.items():
        row = {d: math.fsum(v) / len(v) for d, v in by_domain.items()}
        row[AVE] = math.fsum(row.values()) / len(row)
        summary[cell_id] = row
    return summary


def render_metrics(records: Sequence[Record]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for rec in records:
        w.writerows(metric_rows(rec))
    return buf.getvalue()


def render_summary_csv(summary: dict[str, dict[str, float]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    columns = list(next(iter(summary.values())))
    w.writerow(["cell", *columns])
    for cell_id, row in summary.items():
        w.writerow([cell_id, *(_fmt(row[c]) for c in columns)])
    return buf.getvalue()


def render_table(summary: dict[str, dict[str, float]]) -> str:
    """Human-readable accuracy table in percent."""
    columns = list(next(iter(summary.values())))
    width = max(len("cell"), *(len(c) for c in summary))
    lines = [f"{'cell':<{width}}  " + "  ".join(f"{c:>7}" for c in columns)]
    for cell_id, row in summary.items():
        lines.append(f"{cell_id:<{width}}  " + "  ".join(f"{100 * row[c]:7.2f}" for c in columns))
    return "\n".join(lines)


def write_reports(out_dir: Path, name: str, records: Sequence[Record]) -> dict[str, Path]:
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out_dir}: {exc.strerror}") from None
    summary = summarize(records)
    contents = {
        "metrics": (f"{name}_metrics.csv", render_metrics(records)),
        "summary_json": (f"{name}_summary.json", json.dumps(summary, indent=2) + "\n"),
        "summary_csv": (f"{name}_summary.csv", render_summary_csv(summary)),
    }
    staged = []
    for key, (fname, text) in contents.items():
        final = out_dir / fname
        tmp = out_dir / (fname + ".tmp")
        try:
            with open(tmp, "w", newline="") as fh:
                fh.write(text)
        except OSError as exc:
            raise OSError(f"cannot write {tmp}: {exc.strerror}") from None
        staged.append((key, tmp, final))
    paths = {}
    for key, tmp, final in staged:
        os.replace(tmp, final)
        paths[key] = final
    return paths


def read_metrics(path: str | os.PathLike) -> list[dict[str, object]]:
    """Parse a metrics CSV back into typed rows."""
    ints = ("seed", "round", "client_id", "steps")
    floats = ("local_loss", "nll", "smooth", "global_acc")
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_HEADER:
            raise ValueError(f"{path}: unexpected header {reader.fieldnames}")
        rows = []
        for r in reader:
            row: dict[str, object] = dict(r)
            for k in ints:
                row[k] = int(r[k])
            for k in floats:
                row[k] = float(r[k])
            rows.append(row)
    return rows


def _select(cells: list[Cell], only: Sequence[str] | None) -> list[Cell]:
    if not only:
        return cells
    known = {c.cell_id for c in cells}
    missing = [c for c in only if c not in known]
    if missing:
        raise ValueError(f"unknown cell(s) {missing}; grid has {sorted(known)}")
    return [c for c in cells if c.cell_id in only]


def run_single(rc: RunConfig, out_dir: Path | None = None, jobs: int = 1) -> dict[str, Path]:
    records = run_cells([Cell("run", rc.fed)], rc.task, rc.seeds, jobs)
    return write_reports(out_dir or rc.output_dir, "run", records)


def run_ablation(
    rc: RunConfig, out_dir: Path | None = None, jobs: int = 1, only: Sequence[str] | None = None
) -> dict[str, Path]:
    """Smoothing on/off x budget on/off for every seed."""
    records = run_cells(_select(ablation_cells(rc), only), rc.task, rc.seeds, jobs)
    return write_reports(out_dir or rc.output_dir, "ablation", records)


def run_sensitivity(
    rc: RunConfig, out_dir: Path | None = None, jobs: int = 1, only: Sequence[str] | None = None
) -> dict[str, Path]:
    records = run_cells(_select(sensitivity_cells(rc), only), rc.task, rc.seeds, jobs)
    return write_reports(out_dir or rc.output_dir, "sensitivity", records)
