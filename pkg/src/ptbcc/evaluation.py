"""Accuracy, exact one-sided signed-rank testing, and comparison reports.

The signed-rank p-value is exact: under the null every assignment of signs
to the ranked absolute differences is equally likely, so the p-value is
the fraction of the 2^n sign patterns whose inferior-rank sum is at most
the observed one. Tied absolute differences get average ranks, which makes
rank sums half-integers; doubling them moves the subset-sum count onto an
integer grid where it is computed exactly.
"""

from __future__ import annotations

import csv
import io
import time
from dataclasses import dataclass, field
from statistics import median
from typing import Callable, Mapping, Sequence

import numpy as np

from .data import PREDICTION_HEADER, Dataset
from .errors import EvaluationError, FormatError, InputError, RowError


def accuracy(predictions, truths: Mapping[int, int]) -> float:
    """Fraction of truth-bearing tasks predicted correctly.

    ``predictions`` is either a full per-task vector or a partial mapping
    of task index to class index; tasks without a truth entry (or, for
    partial predictions, without a prediction) are excluded from both
    numerator and denominator.
    """
    if not truths:
        raise EvaluationError("no truth entries to evaluate against")
    if isinstance(predictions, Mapping):
        pairs = [
            (predictions[i], k) for i, k in truths.items() if i in predictions
        ]
    else:
        vec = np.asarray(predictions)
        if truths and max(truths) >= vec.shape[0]:
            raise InputError("truth entry references a task beyond the predictions")
        pairs = [(int(vec[i]), k) for i, k in truths.items()]
    if not pairs:
        raise EvaluationError("no task is covered by both predictions and truths")
    return sum(1 for p, t in pairs if p == t) / len(pairs)


@dataclass(frozen=True)
class WilcoxonReport:
    """n non-tied pairs, inferior-rank sum S, exact one-sided p-value."""

    n: int
    s_statistic: float
    p_value: float


def average_ranks(values: Sequence[float]) -> np.ndarray:
    """1-based ranks with ties sharing their average rank."""
    arr = np.asarray(values, dtype=np.float64)
    order = np.argsort(arr, kind="stable")
    ranks = np.empty(arr.shape[0])
    i = 0
    while i < arr.shape[0]:
        j = i
        while j < arr.shape[0] and arr[order[j]] == arr[order[i]]:
            j += 1
        ranks[order[i:j]] = (i + j + 1) / 2.0
        i = j
    return ranks

def signed_rank_cdf_count(ranks: Sequence[float], s: float) -> int:
    """Number of rank subsets with sum <= s, by exact subset-sum convolution.

    Ranks are half-integers, so doubling puts every subset sum on an
    integer grid; counts are exact Python integers.
    """
    doubled = [int(round(2.0 * r)) for r in ranks]
    if any(abs(2.0 * r - d) > 1e-9 for r, d in zip(ranks, doubled)):
        raise InputError("ranks must be half-integers (average ranks of 1..n)")
    bound = int(np.floor(2.0 * s + 1e-9))
    if bound < 0:
        return 0
    total = sum(doubled)
    bound = min(bound, total)
    counts = [0] * (total + 1)
    counts[0] = 1
    for w in doubled:
        for v in range(total, w - 1, -1):
            counts[v] += counts[v - w]
    return sum(counts[: bound + 1])


def wilcoxon_one_sided(
    pairs: Sequence[tuple[float, float]], tie_policy: str = "drop"
) -> WilcoxonReport:
    """Exact one-sided signed-rank test of method accuracies against a reference.

    Differences d = method - reference; zero differences are dropped
    (reducing n), absolute differences are ranked with average ranks on
    ties, and S is the rank sum over pairs where the method is inferior
    (d < 0). Small p means the method beats the reference more strongly
    than chance sign flips would.
    """
    if not pairs:
        raise InputError("wilcoxon_one_sided needs at least one pair")
    if tie_policy != "drop":
        raise InputError(f"unsupported tie policy: {tie_policy!r}")
    diffs = [float(m) - float(r) for m, r in pairs]
    nonzero = [d for d in diffs if d != 0.0]
    n = len(nonzero)
    if n == 0:
        return WilcoxonReport(n=0, s_statistic=0.0, p_value=1.0)
    ranks = average_ranks([abs(d) for d in nonzero])
    s = float(ranks[[d < 0 for d in nonzero]].sum())
    count = signed_rank_cdf_count(ranks, s)
    return WilcoxonReport(n=n, s_statistic=s, p_value=count / 2.0**n)


def significance_stars(p: float) -> str:
    if p < 0.01:
        return "**"
    if p < 0.1:
        return "*"
    return ""


@dataclass
class MethodRun:
    """Per-dataset accuracies (and optional runtimes) of one method."""

    method_name: str
    per_dataset_accuracy: dict[str, float]
    per_dataset_runtime: dict[str, float] = field(default_factory=dict)


def compare_methods(runs: Sequence[MethodRun], reference: str) -> dict:
    """Average-accuracy table with the signed-rank test against ``reference``.

    All runs must cover the same dataset set. Rows keep declaration order;
    the reference row carries no test statistics.
    """
    if not runs:
        raise InputError("compare_methods needs at least one run")
    ref_run = next((r for r in runs if r.method_name == reference), None)
    if ref_run is None:
        raise InputError(f"reference method {reference!r} is not among the runs")
    datasets = list(ref_run.per_dataset_accuracy)
    key_set = set(datasets)
    for run in runs:
        if set(run.per_dataset_accuracy) != key_set:
            raise InputError(
                f"run {run.method_name!r} covers a different dataset set"
            )

    rows = []
    for run in runs:
        row: dict = {
            "method": run.method_name,
            "average_accuracy": float(
                np.mean([run.per_dataset_accuracy[d] for d in datasets])
            ),
        }
        if run.per_dataset_runtime:
            row["average_runtime_s"] = float(
                np.mean([run.per_dataset_runtime[d] for d in run.per_dataset_runtime])
            )
        if run is not ref_run:
            report = wilcoxon_one_sided(
                [
                    (run.per_dataset_accuracy[d], ref_run.per_dataset_accuracy[d])
                    for d in datasets
                ]
            )
            row.update(
                s_statistic=report.s_statistic,
                p_value=report.p_value,
                significance=significance_stars(report.p_value),
            )
        rows.append(row)
    return {"reference": reference, "datasets": datasets, "methods": rows}


def format_comparison(report: dict) -> str:
    """Aligned plain-text rendering of a compare_methods report."""
    header = ["Method", "Avg. Accuracy", "S", "Sig.", "p-value"]
    lines = [header]
    for row in report["methods"]:
        lines.append(
            [
                row["method"],
                f"{row['average_accuracy']:.4f}",
                f"{row['s_statistic']:g}" if "s_statistic" in row else "",
                row.get("significance", ""),
                f"{row['p_value']:.4f}" if "p_value" in row else "",
            ]
        )
    widths = [max(len(line[c]) for line in lines) for c in range(len(header))]
    return "\n".join(
        "  ".join(cell.ljust(w) for cell, w in zip(line, widths)).rstrip()
        for line in lines
    )


def load_external_predictions(source, dataset: Dataset) -> dict[int, int]:
    """Read a ``question,predicted`` CSV into a task-index to class-index map.

    Lets externally produced prediction files be scored with the same
    accuracy machinery; unknown tasks or labels raise a RowError with the
    offending line number.
    """
    stream = io.StringIO(source) if isinstance(source, str) else source
    rows = list(csv.reader(stream))
    if not rows or tuple(f.strip() for f in rows[0]) != PREDICTION_HEADER:
        raise FormatError(
            f"malformed predictions header: expected {','.join(PREDICTION_HEADER)}"
        )
    task_index = dataset.task_index
    class_index = dataset.class_index
    out: dict[int, int] = {}
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != 2:
            raise RowError(f"expected 2 fields, got {len(row)}", lineno)
        task, label = (f.strip() for f in row)
        if task not in task_index:
            raise RowError(f"unknown task {task!r}", lineno)
        if label not in class_index:
            raise RowError(f"unknown class label {label!r}", lineno)
        i = task_index[task]
        if i in out:
            raise RowError(f"duplicate prediction for task {task!r}", lineno)
        out[i] = class_index[label]
    if not out:
        raise EvaluationError("predictions file contains no data rows")
    return out


def benchmark(method: Callable[[Dataset], object], dataset: Dataset, repetitions: int = 1) -> float:
    """Median wall-clock seconds of ``method(dataset)`` over ``repetitions`` runs.

    The dataset is already in memory, so file I/O never enters the timing.
    """
    if repetitions < 1:
        raise InputError("repetitions must be >= 1")
    times = []
    for _ in range(repetitions):
        start = time.perf_counter()
        method(dataset)
        times.append(time.perf_counter() - start)
    return float(median(times))
