"""Synthetic dataset sampler following the model's generative process.

Sampling order: a truth distribution tau ~ Dir(u); per-worker prototype
mixtures pi_j ~ Dir(beta); per-(prototype, truth) annotation rows
v_sk ~ Dir(a_sk); then per task a truth z_i ~ Cat(tau), a uniform draw of
``labels_per_task`` distinct workers, and per selected worker a prototype
x ~ Cat(pi_j) and an annotation y ~ Cat(v_{x, z_i}).

Everything is driven by one ``numpy`` generator, so a fixed seed gives
bit-identical output across runs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .data import AnnotationRecord, Dataset, build_dataset
from .errors import HyperparameterError

_TASK, _WORKER, _CLASS = "t{}", "w{}", "c{}"


@dataclass(frozen=True)
class SyntheticConfig:
    """Size and prior knobs for :func:`generate_synthetic`."""

    num_tasks: int
    num_workers: int
    num_classes: int
    num_prototypes: int
    labels_per_task: int
    u: np.ndarray
    beta: np.ndarray
    a: np.ndarray

    def validate(self) -> None:
        for name, val in (
            ("num_tasks", self.num_tasks),
            ("num_workers", self.num_workers),
            ("num_prototypes", self.num_prototypes),
            ("labels_per_task", self.labels_per_task),
        ):
            if int(val) < 1:
                raise HyperparameterError(f"{name} must be >= 1, got {val}")
        if self.num_classes < 2:
            raise HyperparameterError("num_classes must be >= 2")
        if self.labels_per_task > self.num_workers:
            raise HyperparameterError("labels_per_task cannot exceed num_workers")
        shapes = {
            "u": (np.asarray(self.u, float), (self.num_classes,)),
            "beta": (np.asarray(self.beta, float), (self.num_prototypes,)),
            "a": (
                np.asarray(self.a, float),
                (self.num_prototypes, self.num_classes, self.num_classes),
            ),
        }
        for name, (arr, shape) in shapes.items():
            if arr.shape != shape:
                raise HyperparameterError(f"{name} must have shape {shape}, got {arr.shape}")
            if not np.all(np.isfinite(arr)) or np.any(arr <= 0.0):
                raise HyperparameterError(f"{name} entries must be positive reals")


@dataclass(frozen=True)
class SyntheticGroundTruth:
    """Latent state behind a synthetic dataset, aligned to its dense indices.

    ``true_pi`` rows follow the dataset's worker index (workers that were
    never selected do not appear in the dataset and are dropped here too);
    ``true_x`` follows the dataset's annotation row order.
    """

    true_z: np.ndarray
    true_tau: np.ndarray
    true_pi: np.ndarray
    true_v: np.ndarray
    true_x: np.ndarray

    def to_json_dict(self) -> dict:
        return {
            "true_z": self.true_z.tolist(),
            "true_tau": self.true_tau.tolist(),
            "true_pi": self.true_pi.tolist(),
            "true_v": self.true_v.tolist(),
            "true_x": self.true_x.tolist(),
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "SyntheticGroundTruth":
        return cls(
            true_z=np.asarray(doc["true_z"], dtype=np.int64),
            true_tau=np.asarray(doc["true_tau"], dtype=np.float64),
            true_pi=np.asarray(doc["true_pi"], dtype=np.float64),
            true_v=np.asarray(doc["true_v"], dtype=np.float64),
            true_x=np.asarray(doc["true_x"], dtype=np.int64),
        )


def confusion_prior(num_classes: int, diag: float, off: float) -> np.ndarray:
    """(K, K) Dirichlet prior with ``diag`` on the diagonal, ``off`` elsewhere."""
    mat = np.full((num_classes, num_classes), float(off))
    np.fill_diagonal(mat, float(diag))
    return mat


def _categorical(rows: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One category draw per row of the (n, m) probability matrix ``rows``."""
    cdf = np.cumsum(rows, axis=1)
    u = rng.random(rows.shape[0])
    return np.minimum((cdf < u[:, None]).sum(axis=1), rows.shape[1] - 1)


def generate_synthetic(
    cfg: SyntheticConfig, seed: int
) -> tuple[Dataset, SyntheticGroundTruth]:
    """Sample a dataset and its latent ground truth; deterministic per seed."""
    cfg.validate()
    u = np.asarray(cfg.u, dtype=np.float64)
    beta = np.asarray(cfg.beta, dtype=np.float64)
    a = np.asarray(cfg.a, dtype=np.float64)
    n_tasks, n_workers = cfg.num_tasks, cfg.num_workers
    n_classes, n_protos = cfg.num_classes, cfg.num_prototypes

    rng = np.random.default_rng(seed)
    tau = rng.dirichlet(u)
    pi = rng.dirichlet(beta, size=n_workers)
    v = np.empty((n_protos, n_classes, n_classes))
    for s in range(n_protos):
        for k in range(n_classes):
            v[s, k] = rng.dirichlet(a[s, k])

    z = _categorical(np.tile(tau, (n_tasks, 1)), rng)
    picked = np.empty((n_tasks, cfg.labels_per_task), dtype=np.int64)
    for i in range(n_tasks):
        picked[i] = rng.choice(n_workers, size=cfg.labels_per_task, replace=False)

    flat_tasks = np.repeat(np.arange(n_tasks), cfg.labels_per_task)
    flat_workers = picked.ravel()
    x = _categorical(pi[flat_workers], rng)
    y = _categorical(v[x, z[flat_tasks]], rng)

    records = [
        AnnotationRecord(_TASK.format(i), _WORKER.format(j), _CLASS.format(k))
        for i, j, k in zip(flat_tasks.tolist(), flat_workers.tolist(), y.tolist())
    ]
    truths = [(_TASK.format(i), _CLASS.format(k)) for i, k in enumerate(z.tolist())]
    universe = [_CLASS.format(k) for k in range(n_classes)]
    dataset = build_dataset(records, truths, class_universe=universe)

    # Workers enter the dataset in first-appearance order; realign pi rows.
    gen_index = [int(w[1:]) for w in dataset.worker_ids]
    truth = SyntheticGroundTruth(
        true_z=z,
        true_tau=tau,
        true_pi=pi[gen_index],
        true_v=v,
        true_x=x,
    )
    return dataset, truth


def dump_ground_truth(truth: SyntheticGroundTruth, cfg: SyntheticConfig, seed: int) -> str:
    """JSON sidecar carrying the latent state plus the generating config."""
    doc = truth.to_json_dict()
    doc["config"] = {
        "num_tasks": cfg.num_tasks,
        "num_workers": cfg.num_workers,
        "num_classes": cfg.num_classes,
        "num_prototypes": cfg.num_prototypes,
        "labels_per_task": cfg.labels_per_task,
        "u": np.asarray(cfg.u).tolist(),
        "beta": np.asarray(cfg.beta).tolist(),
        "a": np.asarray(cfg.a).tolist(),
        "seed": seed,
    }
    return json.dumps(doc, indent=2)


def load_ground_truth(text: str) -> SyntheticGroundTruth:
    return SyntheticGroundTruth.from_json_dict(json.loads(text))
