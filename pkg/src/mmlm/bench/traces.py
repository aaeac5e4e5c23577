"""Trace CSV files, per-run metadata and the summary tables."""

from __future__ import annotations

import csv
import json
import math
import statistics
from collections import defaultdict
from pathlib import Path
from typing import Iterable, List

from ..solvers import IterationRecord

__all__ = [
    "TRACE_COLUMNS",
    "SUMMARY_COLUMNS",
    "TIMEOUT_MARK",
    "TraceFormatError",
    "write_trace",
    "read_trace",
    "write_meta",
    "read_meta",
    "summarize",
    "write_summary",
    "read_summary",
    "pivot_times",
]

TRACE_COLUMNS = (
    "iter",
    "elapsed_s",
    "f",
    "norm_F",
    "norm_G_eta",
    "M",
    "lambda",
    "accepted",
    "inner_iters",
    "F_evals",
    "J_evals",
)
SUMMARY_COLUMNS = (
    "d",
    "n",
    "m",
    "sigma_noise",
    "x0_mode",
    "inner",
    "solver",
    "runs",
    "completed",
    "time_mean",
    "time_std",
    "F_evals_mean",
    "F_evals_std",
    "J_evals_mean",
    "J_evals_std",
    "evals_mean",
    "iters_mean",
    "iters_std",
    "partial",
)
TIMEOUT_MARK = "---"


class TraceFormatError(ValueError):
    """A trace or metadata file could not be parsed."""


def write_trace(path, trace: Iterable[IterationRecord]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACE_COLUMNS)
        for r in trace:
            writer.writerow(
                [
                    r.k,
                    repr(r.elapsed_seconds),
                    repr(r.f_value),
                    repr(r.norm_F),
                    repr(r.norm_G_eta),
                    repr(r.M_current),
                    "" if r.lambda_k is None else repr(r.lambda_k),
                    int(r.accepted),
                    r.inner_iterations,
                    r.cumulative_F_evals,
                    r.cumulative_J_evals,
                ]
            )


def read_trace(path) -> List[IterationRecord]:
    """Parse a trace CSV; the last row is marked as the terminal record."""
    path = Path(path)
    records = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != TRACE_COLUMNS:
            raise TraceFormatError(f"{path}:1: unexpected header {header!r}")
        for row in reader:
            line = reader.line_num
            if len(row) != len(TRACE_COLUMNS):
                raise TraceFormatError(f"{path}:{line}: expected {len(TRACE_COLUMNS)} fields, got {len(row)}")
            try:
                records.append(
                    IterationRecord(
                        k=int(row[0]),
                        elapsed_seconds=float(row[1]),
                        f_value=float(row[2]),
                        norm_F=float(row[3]),
                        norm_G_eta=float(row[4]),
                        M_current=float(row[5]),
                        lambda_k=None if row[6] == "" else float(row[6]),
                        accepted=bool(int(row[7])),
                        inner_iterations=int(row[8]),
                        cumulative_F_evals=int(row[9]),
                        cumulative_J_evals=int(row[10]),
                    )
                )
            except ValueError as exc:
                raise TraceFormatError(f"{path}:{line}: {exc}") from None
    if records:
        records[-1].terminal = True
    return records


def write_meta(path, meta: dict) -> None:
    Path(path).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def read_meta(path) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise TraceFormatError(f"{path}:{exc.lineno}: {exc.msg}") from None


def _mean_std(values):
    if not values:
        return math.nan, math.nan
    if len(values) == 1:
        return float(values[0]), 0.0
    return statistics.fmean(values), statistics.stdev(values)


def summarize(in_dir) -> List[dict]:
    """Aggregate every ``*.csv`` trace with a ``*.json`` sidecar in ``in_dir``.

    Rows are keyed by instance shape, noise, start mode, inner rule and solver.
    Time statistics become ``TIMEOUT_MARK`` if any run did not converge; eval
    and iteration statistics are then taken over the converged runs only and
    the row is flagged ``partial``.
    """
    groups = defaultdict(list)
    for trace_path in sorted(Path(in_dir).glob("*.csv")):
        meta_path = trace_path.with_suffix(".json")
        if not meta_path.exists():
            continue
        meta = read_meta(meta_path)
        trace = read_trace(trace_path)
        try:
            inst = meta["instance"]
            key = (inst["d"], inst["n"], inst["m"], inst["sigma_noise"], inst["x0_mode"], meta["inner"], meta["solver"])
            status = meta["status"]
        except KeyError as exc:
            raise TraceFormatError(f"{meta_path}: missing field {exc}") from None
        groups[key].append((status, meta, trace))

    rows = []
    for key, runs in groups.items():
        done = [(meta, trace) for status, meta, trace in runs if status == "converged"]
        times = [meta["elapsed_s"] for meta, _ in done]
        F = [trace[-1].cumulative_F_evals for _, trace in done]
        J = [trace[-1].cumulative_J_evals for _, trace in done]
        iters = [sum(r.accepted for r in trace) for _, trace in done]
        partial = len(done) < len(runs)
        t_mean, t_std = _mean_std(times)
        row = dict(zip(SUMMARY_COLUMNS[:7], key))
        row.update(
            runs=len(runs),
            completed=len(done),
            time_mean=TIMEOUT_MARK if partial else t_mean,
            time_std=TIMEOUT_MARK if partial else t_std,
            F_evals_mean=_mean_std(F)[0],
            F_evals_std=_mean_std(F)[1],
            J_evals_mean=_mean_std(J)[0],
            J_evals_std=_mean_std(J)[1],
            evals_mean=_mean_std([a + b for a, b in zip(F, J)])[0],
            iters_mean=_mean_std(iters)[0],
            iters_std=_mean_std(iters)[1],
            partial=int(partial),
        )
        rows.append(row)
    rows.sort(key=lambda r: (r["d"], r["n"], r["m"], r["sigma_noise"], r["x0_mode"], r["inner"], r["solver"]))
    return rows


def write_summary(rows: List[dict], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=SUMMARY_COLUMNS)
        writer.writeheader()
        for row in rows:
            writer.writerow(row)


def read_summary(path) -> List[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def pivot_times(rows: List[dict], solvers=("proposed", "fan", "kyf", "pg")) -> List[dict]:
    """One row per instance shape with a ``mean±std`` time column per solver."""
    table = {}
    for r in rows:
        key = (r["d"], r["n"], r["m"], r["sigma_noise"], r["x0_mode"], r["inner"])
        out = table.setdefault(key, dict(d=r["d"], n=r["n"], m=r["m"], **{s: "" for s in solvers}))
        if r["solver"] in solvers:
            if r["time_mean"] == TIMEOUT_MARK:
                out[r["solver"]] = TIMEOUT_MARK
            else:
                out[r["solver"]] = f"{float(r['time_mean']):.3g}±{float(r['time_std']):.2g}"
    return list(table.values())
