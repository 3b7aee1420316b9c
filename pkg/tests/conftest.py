"""Shared test fixtures and dataset factories."""

from __future__ import annotations

import numpy as np
import pytest

from ptbcc import AnnotationRecord, Dataset, build_dataset
from ptbcc.synthesis import SyntheticConfig, confusion_prior


def dataset_from_triples(triples, n_tasks, n_workers, n_classes) -> Dataset:
    """Directly assemble a Dataset from (task, worker, class) index triples."""
    return Dataset(
        num_tasks=n_tasks,
        num_workers=n_workers,
        num_classes=n_classes,
        annotations=np.asarray(triples, dtype=np.int64),
        task_ids=tuple(f"t{i}" for i in range(n_tasks)),
        worker_ids=tuple(f"w{j}" for j in range(n_workers)),
        class_labels=tuple(f"c{k}" for k in range(n_classes)),
    )


def random_records(n_tasks, n_workers, n_classes, labels_per_task, rng):
    records = []
    for i in range(n_tasks):
        for j in rng.choice(n_workers, size=labels_per_task, replace=False):
            records.append(
                AnnotationRecord(f"t{i}", f"w{j}", f"c{rng.integers(n_classes)}")
            )
    return records


def recovery_config(n_classes=10, diag=6.0, off=0.3, flat=20.0,
                    n_tasks=200, n_workers=30, labels_per_task=7) -> SyntheticConfig:
    """One sharply diagonal prototype, one near-uniform one, polarized workers."""
    return SyntheticConfig(
        num_tasks=n_tasks,
        num_workers=n_workers,
        num_classes=n_classes,
        num_prototypes=2,
        labels_per_task=labels_per_task,
        u=np.full(n_classes, 8.0),
        beta=np.array([0.35, 0.15]),
        a=np.stack(
            [confusion_prior(n_classes, diag, off), confusion_prior(n_classes, flat, flat)]
        ),
    )


def elbo_check_config() -> SyntheticConfig:
    """200 tasks, 30 workers, 5 classes, 5 labels per task."""
    return recovery_config(
        n_classes=5, diag=20.0, off=0.3, flat=30.0,
        n_tasks=200, n_workers=30, labels_per_task=5,
    )


@pytest.fixture
def tiny_dataset() -> Dataset:
    records = [
        AnnotationRecord("t1", "w1", "A"),
        AnnotationRecord("t1", "w2", "A"),
        AnnotationRecord("t1", "w3", "B"),
        AnnotationRecord("t2", "w1", "B"),
        AnnotationRecord("t2", "w2", "B"),
    ]
    return build_dataset(records)
