"""Scikit-learn style estimator fronts for the aggregators.

Truth inference is transductive: ``fit`` consumes a :class:`Dataset` and
infers the labels of that same dataset, so these estimators follow the
clustering convention (fitted attributes plus ``fit_predict``) rather
than taking a feature matrix. Construction stores hyperparameters
verbatim; validation happens in ``fit``; ``get_params``/``set_params``
come from ``BaseEstimator`` so the classes clone and grid-search like any
other estimator.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from . import baselines, engine
from .data import Dataset
from .errors import InputError


def check_dataset(X) -> Dataset:
    """Validate that ``X`` is a non-empty Dataset (shared fit-input check)."""
    if not isinstance(X, Dataset):
        raise InputError(f"expected a Dataset, got {type(X).__name__}")
    if X.num_annotations == 0:
        raise InputError("dataset has no annotations")
    return X


class MajorityVote(BaseEstimator):
    """Most-frequent-label aggregation; ties break to the lowest class index."""

    def fit(self, X: Dataset, y=None):
        result = baselines.majority_vote(check_dataset(X))
        self.predictions_ = result.predictions
        self.posterior_ = result.posterior
        self.n_iter_ = result.iterations
        return self

    def fit_predict(self, X: Dataset, y=None) -> np.ndarray:
        return self.fit(X).predictions_


class DawidSkene(BaseEstimator):
    """Per-worker confusion-matrix EM aggregation."""

    def __init__(self, tol: float = 1e-3, max_iter: int = 100, smoothing: float = baselines.DS_SMOOTHING):
        self.tol = tol
        self.max_iter = max_iter
        self.smoothing = smoothing

    def fit(self, X: Dataset, y=None):
        result = baselines.dawid_skene(
            check_dataset(X),
            tol=self.tol,
            max_iter=self.max_iter,
            smoothing=self.smoothing,
        )
        self.predictions_ = result.predictions
        self.posterior_ = result.posterior
        self.n_iter_ = result.iterations
        self.log_likelihood_trace_ = result.log_likelihood_trace
        return self

    def fit_predict(self, X: Dataset, y=None) -> np.ndarray:
        return self.fit(X).predictions_


class PrototypeBCC(BaseEstimator):
    """Prototype-sharing Bayesian aggregation via variational inference.

    Instead of one confusion matrix per worker, a small shared set of
    prototype confusion matrices is learned and every worker gets a
    Dirichlet posterior over them, which keeps the estimates stable when
    workers label few tasks or classes are imbalanced.
    """

    def __init__(
        self,
        num_prototypes: int = 2,
        e: float = 1.0,
        f: float = 5.0,
        m: float = 1.35,
        xi: float = 1e-3,
        beta_scale: float = 0.4,
        a_scale: float = 0.5,
        max_iterations: int = 500,
        extra_prototype_mode: str = "uniform_dirichlet",
        seed: int = 0,
        check_identities: bool = False,
    ):
        self.num_prototypes = num_prototypes
        self.e = e
        self.f = f
        self.m = m
        self.xi = xi
        self.beta_scale = beta_scale
        self.a_scale = a_scale
        self.max_iterations = max_iterations
        self.extra_prototype_mode = extra_prototype_mode
        self.seed = seed
        self.check_identities = check_identities

    def hyperparams(self) -> engine.Hyperparams:
        return engine.Hyperparams(
            num_prototypes=self.num_prototypes,
            e=self.e,
            f=self.f,
            m=self.m,
            xi=self.xi,
            beta_scale=self.beta_scale,
            a_scale=self.a_scale,
            max_iterations=self.max_iterations,
            extra_prototype_mode=self.extra_prototype_mode,
            seed=self.seed,
        )

    def fit(self, X: Dataset, y=None):
        result = engine.fit(
            check_dataset(X), self.hyperparams(), check_identities=self.check_identities
        )
        self.result_ = result
        self.predictions_ = result.predictions
        self.posterior_ = result.phi
        self.expected_prototypes_ = result.expected_prototypes
        self.expected_worker_mix_ = result.expected_worker_mix
        self.elbo_trace_ = result.elbo_trace
        self.n_iter_ = result.iterations
        self.converged_ = result.converged
        return self

    def fit_predict(self, X: Dataset, y=None) -> np.ndarray:
        return self.fit(X).predictions_
