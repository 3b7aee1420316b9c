"""Annotation data model: CSV ingestion, validation, dense index construction.

The canonical on-disk formats are two small CSVs:

* answers: header ``question,worker,answer``, one annotation per row;
* truths:  header ``question,truth``, one known true label per row.

``build_dataset`` turns parsed records into a :class:`Dataset` with dense
integer indices for tasks, workers, and classes, assigned in first-appearance
order so that construction is deterministic without any hidden sorting.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    ClassUniverseError,
    DuplicateAnnotationError,
    EmptyInputError,
    FormatError,
    InputError,
    RowError,
)

ANSWER_HEADER = ("question", "worker", "answer")
TRUTH_HEADER = ("question", "truth")
PREDICTION_HEADER = ("question", "predicted")


@dataclass(frozen=True)
class AnnotationRecord:
    """One raw annotation: worker ``worker_id`` labeled task ``task_id``."""

    task_id: str
    worker_id: str
    label: str


@dataclass(frozen=True)
class Dataset:
    """Dense-indexed annotation dataset.

    ``annotations`` is an (N, 3) int array with columns
    (task_index, worker_index, class_index). ``truths`` maps task_index to
    class_index for the subset of tasks whose true label is known. Tasks
    that appear only in a truth file (never annotated) are kept in the
    index with an empty annotator set.

    Instances are immutable after construction and safe for concurrent
    reads; the arrays are marked read-only.
    """

    num_tasks: int
    num_workers: int
    num_classes: int
    annotations: np.ndarray
    task_ids: tuple[str, ...]
    worker_ids: tuple[str, ...]
    class_labels: tuple[str, ...]
    truths: dict[int, int] = field(default_factory=dict)

    def __post_init__(self):
        self.annotations.flags.writeable = False

    # -- dense index columns -------------------------------------------------

    @property
    def task_idx(self) -> np.ndarray:
        return self.annotations[:, 0]

    @property
    def worker_idx(self) -> np.ndarray:
        return self.annotations[:, 1]

    @property
    def class_idx(self) -> np.ndarray:
        return self.annotations[:, 2]

    @property
    def num_annotations(self) -> int:
        return self.annotations.shape[0]

    # -- id maps (string <-> dense index) ------------------------------------

    @property
    def task_index(self) -> dict[str, int]:
        return {t: i for i, t in enumerate(self.task_ids)}

    @property
    def worker_index(self) -> dict[str, int]:
        return {w: j for j, w in enumerate(self.worker_ids)}

    @property
    def class_index(self) -> dict[str, int]:
        return {c: k for k, c in enumerate(self.class_labels)}

    # -- adjacency ------------------------------------------------------------

    def workers_of_task(self) -> list[np.ndarray]:
        """W_i: worker indices that annotated each task, in annotation order."""
        return self._group_by(self.task_idx, self.worker_idx, self.num_tasks)

    def tasks_of_worker(self) -> list[np.ndarray]:
        """N_j: task indices annotated by each worker, in annotation order."""
        return self._group_by(self.worker_idx, self.task_idx, self.num_workers)

    @staticmethod
    def _group_by(keys: np.ndarray, values: np.ndarray, n: int) -> list[np.ndarray]:
        out: list[list[int]] = [[] for _ in range(n)]
        for k, v in zip(keys.tolist(), values.tolist()):
            out[k].append(v)
        return [np.asarray(g, dtype=np.int64) for g in out]

    def labels_per_worker(self) -> np.ndarray:
        """|N_j| for every worker."""
        return np.bincount(self.worker_idx, minlength=self.num_workers)

    def labels_per_task(self) -> np.ndarray:
        """|W_i| for every task (zero for truth-only tasks)."""
        return np.bincount(self.task_idx, minlength=self.num_tasks)

    def evaluable_truths(self) -> dict[int, int]:
        """Truth entries restricted to tasks with at least one annotation.

        Truth-only tasks stay in the index but are excluded from accuracy.
        """
        annotated = self.labels_per_task() > 0
        return {i: k for i, k in self.truths.items() if annotated[i]}


def _read_rows(source) -> list[list[str]]:
    stream = io.StringIO(source) if isinstance(source, str) else source
    return [row for row in csv.reader(stream)]


def _check_header(row: list[str] | None, expected: tuple[str, ...], what: str) -> None:
    if row is None:
        raise FormatError(f"{what} file is empty; expected header {','.join(expected)}")
    got = tuple(f.strip().lstrip("﻿") for f in row)
    if got != expected:
        raise FormatError(
            f"malformed {what} header: expected {','.join(expected)}, got {','.join(got)}"
        )


def parse_annotations(source) -> list[AnnotationRecord]:
    """Parse an answers CSV (header ``question,worker,answer``).

    ``source`` may be a text stream or the CSV content itself as a string.
    Fields are whitespace-trimmed; records are returned in file order.

    Raises:
        FormatError: missing or malformed header.
        RowError: a row does not have exactly three non-empty fields.
        EmptyInputError: valid header but no data rows.
    """
    rows = _read_rows(source)
    _check_header(rows[0] if rows else None, ANSWER_HEADER, "answers")
    records = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != 3:
            raise RowError(f"expected 3 fields, got {len(row)}", lineno)
        task, worker, label = (f.strip() for f in row)
        if not task or not worker or not label:
            raise RowError("empty field in annotation row", lineno)
        records.append(AnnotationRecord(task, worker, label))
    if not records:
        raise EmptyInputError("answers file contains no data rows")
    return records


def parse_truths(source) -> list[tuple[str, str]]:
    """Parse a truth CSV (header ``question,truth``) into (task, label) pairs."""
    rows = _read_rows(source)
    _check_header(rows[0] if rows else None, TRUTH_HEADER, "truth")
    pairs = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != 2:
            raise RowError(f"expected 2 fields, got {len(row)}", lineno)
        task, label = (f.strip() for f in row)
        if not task or not label:
            raise RowError("empty field in truth row", lineno)
        pairs.append((task, label))
    return pairs


def build_dataset(
    records: Sequence[AnnotationRecord],
    truths: Iterable[tuple[str, str]] | None = None,
    class_universe: Sequence[str] | None = None,
    duplicate_policy: str = "reject",
) -> Dataset:
    """Assemble a :class:`Dataset` from parsed records.

    Dense indices follow first-appearance order. The class universe is the
    union of annotation and truth labels (annotation labels first) unless
    given explicitly, in which case any label outside it is an error.

    ``duplicate_policy`` is ``reject`` (default) or ``keep_last``; under
    ``keep_last`` a repeated (task, worker) pair keeps its first position
    but takes the last label seen.
    """
    if not records:
        raise InputError("cannot build a dataset from zero annotation records")
    if duplicate_policy not in ("reject", "keep_last"):
        raise InputError(f"unknown duplicate policy: {duplicate_policy!r}")

    explicit_classes = class_universe is not None
    class_of: dict[str, int] = {}
    if explicit_classes:
        for label in class_universe:
            if label in class_of:
                raise ClassUniverseError(f"class universe repeats label {label!r}")
            class_of[label] = len(class_of)

    def class_idx_of(label: str, context: str) -> int:
        if label not in class_of:
            if explicit_classes:
                raise ClassUniverseError(
                    f"{context} label {label!r} is outside the explicit class universe"
                )
            class_of[label] = len(class_of)
        return class_of[label]

    task_of: dict[str, int] = {}
    worker_of: dict[str, int] = {}
    seen_pairs: dict[tuple[int, int], int] = {}
    triples: list[list[int]] = []

    for rec in records:
        i = task_of.setdefault(rec.task_id, len(task_of))
        j = worker_of.setdefault(rec.worker_id, len(worker_of))
        k = class_idx_of(rec.label, "annotation")
        pos = seen_pairs.get((i, j))
        if pos is None:
            seen_pairs[(i, j)] = len(triples)
            triples.append([i, j, k])
        elif duplicate_policy == "reject":
            raise DuplicateAnnotationError(
                f"duplicate annotation for task {rec.task_id!r} by worker {rec.worker_id!r}"
            )
        else:
            triples[pos][2] = k

    truth_map: dict[int, int] = {}
    for task_id, label in truths or ():
        # Truth-only tasks are appended to the index; they carry no
        # annotations and are skipped by inference and accuracy.
        i = task_of.setdefault(task_id, len(task_of))
        k = class_idx_of(label, "truth")
        if i in truth_map and truth_map[i] != k:
            raise InputError(f"conflicting truth labels for task {task_id!r}")
        truth_map[i] = k

    if len(class_of) < 2:
        raise InputError("a dataset needs at least two classes")

    by_index = sorted(class_of, key=class_of.get)
    return Dataset(
        num_tasks=len(task_of),
        num_workers=len(worker_of),
        num_classes=len(class_of),
        annotations=np.asarray(triples, dtype=np.int64),
        task_ids=tuple(sorted(task_of, key=task_of.get)),
        worker_ids=tuple(sorted(worker_of, key=worker_of.get)),
        class_labels=tuple(by_index),
        truths=truth_map,
    )


def load_dataset(
    answers_path,
    truths_path=None,
    class_universe: Sequence[str] | None = None,
    duplicate_policy: str = "reject",
) -> Dataset:
    """Read answers (and optionally truths) CSV files into a Dataset."""
    with open(answers_path, "r", encoding="utf-8", newline="") as fh:
        records = parse_annotations(fh)
    pairs = None
    if truths_path is not None:
        with open(truths_path, "r", encoding="utf-8", newline="") as fh:
            pairs = parse_truths(fh)
    return build_dataset(records, pairs, class_universe, duplicate_policy)


def dump_answers(dataset: Dataset) -> str:
    """Serialize the annotations back to answers-CSV text."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(ANSWER_HEADER)
    for i, j, k in dataset.annotations.tolist():
        writer.writerow(
            [dataset.task_ids[i], dataset.worker_ids[j], dataset.class_labels[k]]
        )
    return buf.getvalue()


def dump_truths(dataset: Dataset) -> str:
    """Serialize the truth map back to truth-CSV text (task index order)."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TRUTH_HEADER)
    for i in sorted(dataset.truths):
        writer.writerow([dataset.task_ids[i], dataset.class_labels[dataset.truths[i]]])
    return buf.getvalue()
