"""Reference aggregators: majority voting and Dawid-Skene EM.

Majority voting doubles as the initializer of the variational engine, so
its vote-fraction computation lives here and is imported there.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import Dataset
from .errors import InputError

DS_SMOOTHING = 1e-6


@dataclass
class BaselineResult:
    """Predictions plus per-task posterior; ``iterations`` is 0 for MV."""

    predictions: np.ndarray
    posterior: np.ndarray
    iterations: int
    log_likelihood_trace: list[float] = field(default_factory=list)


def vote_fractions(dataset: Dataset) -> np.ndarray:
    """(T, K) matrix of per-task label shares; uniform rows for unannotated tasks."""
    n_tasks, n_classes = dataset.num_tasks, dataset.num_classes
    flat = dataset.task_idx * n_classes + dataset.class_idx
    counts = np.bincount(flat, minlength=n_tasks * n_classes).reshape(
        n_tasks, n_classes
    )
    totals = counts.sum(axis=1, keepdims=True)
    out = np.where(totals > 0, counts / np.maximum(totals, 1), 1.0 / n_classes)
    return out


def majority_vote(dataset: Dataset) -> BaselineResult:
    """Predict each task's most frequent label; ties go to the lowest class index."""
    if dataset.num_annotations == 0:
        raise InputError("majority voting needs at least one annotation")
    posterior = vote_fractions(dataset)
    return BaselineResult(
        predictions=np.argmax(posterior, axis=1),
        posterior=posterior,
        iterations=0,
    )


def dawid_skene(
    dataset: Dataset,
    tol: float = 1e-3,
    max_iter: int = 100,
    smoothing: float = DS_SMOOTHING,
) -> BaselineResult:
    """Per-worker confusion-matrix EM with smoothed MLE M-steps.

    Initialized from majority-vote fractions. The M-step adds ``smoothing``
    to the class-marginal and confusion counts before normalizing, which
    keeps every confusion entry strictly positive on sparse workers; the
    E-step runs in the log domain. Stops when the largest posterior change
    falls below ``tol``.
    """
    if dataset.num_annotations == 0:
        raise InputError("Dawid-Skene needs at least one annotation")
    n_tasks, n_workers, n_classes = (
        dataset.num_tasks,
        dataset.num_workers,
        dataset.num_classes,
    )
    task_idx, worker_idx, class_idx = (
        dataset.task_idx,
        dataset.worker_idx,
        dataset.class_idx,
    )

    posterior = vote_fractions(dataset)
    ll_trace: list[float] = []
    iterations = 0
    for _ in range(max_iter):
        iterations += 1

        # M-step: smoothed MLE of class marginals and confusion matrices.
        marginals = posterior.sum(axis=0) + smoothing
        marginals /= marginals.sum()
        conf = np.full((n_workers, n_classes, n_classes), smoothing)
        for label in range(n_classes):
            mask = class_idx == label
            if mask.any():
                weights = posterior[task_idx[mask]]
                for k in range(n_classes):
                    conf[:, k, label] += np.bincount(
                        worker_idx[mask], weights=weights[:, k], minlength=n_workers
                    )
        conf /= conf.sum(axis=2, keepdims=True)

        # E-step in the log domain.
        log_conf = np.log(conf)
        scores = np.zeros((n_tasks, n_classes)) + np.log(marginals)[None, :]
        contrib = log_conf[worker_idx, :, class_idx]
        for k in range(n_classes):
            scores[:, k] += np.bincount(
                task_idx, weights=contrib[:, k], minlength=n_tasks
            )

        peak = scores.max(axis=1, keepdims=True)
        shifted = np.exp(scores - peak)
        norm = shifted.sum(axis=1, keepdims=True)
        ll_trace.append(float((np.log(norm) + peak).sum()))
        new_posterior = shifted / norm

        delta = float(np.max(np.abs(new_posterior - posterior)))
        posterior = new_posterior
        if delta < tol:
            break

    return BaselineResult(
        predictions=np.argmax(posterior, axis=1),
        posterior=posterior,
        iterations=iterations,
        log_likelihood_trace=ll_trace,
    )
