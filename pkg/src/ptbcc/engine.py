"""Variational inference engine for prototype-sharing annotator modeling.

The model couples three Dirichlet posteriors (truth distribution ``nu``,
per-worker prototype mixtures ``eta``, per-(prototype, truth) annotation
rows ``mu``) with two categorical posteriors (per-task truth ``phi``,
per-annotation prototype assignment ``theta``). One sweep updates the
blocks in the order nu, eta, mu, then refreshes the digamma expectations
and updates theta and phi; each block update is an exact coordinate-ascent
step, so the evidence lower bound is non-decreasing across sweeps.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass

import numpy as np

from .baselines import vote_fractions
from .data import Dataset
from .errors import HyperparameterError, InputError, NumericError
from .special import digamma, log_beta_rows

logger = logging.getLogger(__name__)

# Classes can carry zero vote mass (never-annotated class in an explicit
# universe, or confusion cells with no co-occurring mass); Dirichlet
# parameters must stay positive, so data-derived priors are floored here.
PRIOR_FLOOR = 1e-6

EXTRA_PROTOTYPE_MODES = ("uniform_dirichlet", "flat_ran")


@dataclass(frozen=True)
class Hyperparams:
    """Scalar knobs of the inference engine.

    ``e``, ``f`` and ``m`` shape the two seed prototypes: the first gets
    diagonal weight f against off-diagonal e (a better-than-chance
    pattern), the second diagonal e against off-diagonal m (a
    worse-than-chance one). ``beta_scale`` and ``a_scale`` scale the
    data-derived Dirichlet priors. ``xi`` is the convergence threshold on
    the largest per-entry change of ``phi`` between sweeps.
    """

    num_prototypes: int = 2
    e: float = 1.0
    f: float = 5.0
    m: float = 1.35
    xi: float = 1e-3
    beta_scale: float = 0.4
    a_scale: float = 0.5
    max_iterations: int = 500
    extra_prototype_mode: str = "uniform_dirichlet"
    seed: int = 0

    def validate(self) -> None:
        if self.num_prototypes < 2:
            raise HyperparameterError("num_prototypes must be >= 2")
        if self.max_iterations < 1:
            raise HyperparameterError("max_iterations must be >= 1")
        for name in ("e", "f", "m", "xi", "beta_scale", "a_scale"):
            val = getattr(self, name)
            if not np.isfinite(val) or val <= 0.0:
                raise HyperparameterError(f"{name} must be a positive real, got {val}")
        if self.extra_prototype_mode not in EXTRA_PROTOTYPE_MODES:
            raise HyperparameterError(
                f"extra_prototype_mode must be one of {EXTRA_PROTOTYPE_MODES}"
            )


@dataclass
class PriorState:
    """Dirichlet hyperparameters fixed for the whole run."""

    u: np.ndarray       # (K,)
    beta: np.ndarray    # (W, S)
    a: np.ndarray       # (S, K, K)


@dataclass
class ModelState:
    """Variational parameters; theta rows follow the annotation order."""

    nu: np.ndarray      # (K,)
    eta: np.ndarray     # (W, S)
    mu: np.ndarray      # (S, K, K)
    phi: np.ndarray     # (T, K) simplex rows
    theta: np.ndarray   # (N, S) simplex rows


@dataclass
class ELogCache:
    """Digamma expectations of the log Dirichlet variables."""

    elog_tau: np.ndarray  # (K,)
    elog_pi: np.ndarray   # (W, S)
    elog_v: np.ndarray    # (S, K, K)


@dataclass
class InferenceResult:
    """Outputs of :func:`fit`."""

    predictions: np.ndarray
    phi: np.ndarray
    expected_prototypes: np.ndarray
    expected_worker_mix: np.ndarray
    elbo_trace: list[float]
    iterations: int
    converged: bool
    wall_time_s: float = 0.0


# ---------------------------------------------------------------------------
# accumulation helpers (deterministic reduction order via bincount)
# ---------------------------------------------------------------------------


def _sum_by_worker(values: np.ndarray, dataset: Dataset) -> np.ndarray:
    out = np.empty((dataset.num_workers, values.shape[1]))
    for s in range(values.shape[1]):
        out[:, s] = np.bincount(
            dataset.worker_idx, weights=values[:, s], minlength=dataset.num_workers
        )
    return out


def _sum_by_task(values: np.ndarray, dataset: Dataset) -> np.ndarray:
    out = np.empty((dataset.num_tasks, values.shape[1]))
    for k in range(values.shape[1]):
        out[:, k] = np.bincount(
            dataset.task_idx, weights=values[:, k], minlength=dataset.num_tasks
        )
    return out


def _confusion_counts(phi: np.ndarray, theta: np.ndarray, dataset: Dataset) -> np.ndarray:
    """counts[s, k, l] = sum over annotations with label l of theta[n, s] * phi[task, k]."""
    n_protos, n_classes = theta.shape[1], phi.shape[1]
    out = np.zeros((n_protos, n_classes, n_classes))
    for label in range(n_classes):
        mask = dataset.class_idx == label
        if mask.any():
            out[:, :, label] = theta[mask].T @ phi[dataset.task_idx[mask]]
    return out


def _softmax_rows(scores: np.ndarray, what: str) -> np.ndarray:
    if not np.all(np.isfinite(scores)):
        raise NumericError(f"non-finite values while updating {what}")
    shifted = scores - scores.max(axis=1, keepdims=True)
    np.exp(shifted, out=shifted)
    shifted /= shifted.sum(axis=1, keepdims=True)
    return shifted


# ---------------------------------------------------------------------------
# initialization
# ---------------------------------------------------------------------------


def initial_prototype_matrices(
    n_classes: int, hp: Hyperparams, rng: np.random.Generator
) -> np.ndarray:
    """Seed prototypes: one diagonal-heavy, one off-diagonal-heavy, extras random.

    Extras (index 2 and up) are sampled row-wise from the uniform Dirichlet,
    or set to the constant 1/K matrix under ``flat_ran``.
    """
    k = n_classes
    v = np.empty((hp.num_prototypes, k, k))
    denom1 = hp.f + (k - 1) * hp.e
    v[0] = hp.e / denom1
    np.fill_diagonal(v[0], hp.f / denom1)
    denom2 = hp.e + (k - 1) * hp.m
    v[1] = hp.m / denom2
    np.fill_diagonal(v[1], hp.e / denom2)
    for s in range(2, hp.num_prototypes):
        if hp.extra_prototype_mode == "flat_ran":
            v[s] = 1.0 / k
        else:
            v[s] = rng.dirichlet(np.ones(k), size=k)
    return v


def initialize(dataset: Dataset, hp: Hyperparams) -> tuple[PriorState, ModelState]:
    """Build the data-derived priors and the starting variational state.

    phi starts at per-task vote fractions; the seed prototypes then induce
    unnormalized prototype responsibilities for every annotation, from
    which the priors u, beta, a are accumulated before theta is normalized.
    nu, eta, mu start at their coordinate-ascent values.
    """
    hp.validate()
    if dataset.num_annotations == 0:
        raise InputError("cannot initialize on a dataset with no annotations")

    rng = np.random.default_rng(hp.seed)
    n_classes = dataset.num_classes
    phi = vote_fractions(dataset)
    v_init = initial_prototype_matrices(n_classes, hp, rng)

    u = np.maximum(phi.sum(axis=0), PRIOR_FLOOR)

    # theta_raw[n, s] = sum_k phi[task_n, k] * v_init[s, k, y_n]
    theta_raw = np.empty((dataset.num_annotations, hp.num_prototypes))
    for label in range(n_classes):
        mask = dataset.class_idx == label
        if mask.any():
            theta_raw[mask] = phi[dataset.task_idx[mask]] @ v_init[:, :, label].T

    beta = hp.beta_scale * _sum_by_worker(theta_raw, dataset)
    a = np.maximum(
        hp.a_scale * _confusion_counts(phi, theta_raw, dataset), PRIOR_FLOOR
    )
    theta = theta_raw / theta_raw.sum(axis=1, keepdims=True)

    prior = PriorState(u=u, beta=beta, a=a)
    state = ModelState(
        nu=update_nu(prior, phi),
        eta=update_eta(prior, theta, dataset),
        mu=update_mu(prior, phi, theta, dataset),
        phi=phi,
        theta=theta,
    )
    return prior, state


# ---------------------------------------------------------------------------
# coordinate-ascent updates
# ---------------------------------------------------------------------------


def compute_elog(state: ModelState) -> ELogCache:
    """Expectations of log tau, log pi, log v under the current Dirichlets."""
    return ELogCache(
        elog_tau=digamma(state.nu) - digamma(state.nu.sum()),
        elog_pi=digamma(state.eta) - digamma(state.eta.sum(axis=1))[:, None],
        elog_v=digamma(state.mu) - digamma(state.mu.sum(axis=2))[:, :, None],
    )


def update_nu(prior: PriorState, phi: np.ndarray) -> np.ndarray:
    return prior.u + phi.sum(axis=0)


def update_eta(prior: PriorState, theta: np.ndarray, dataset: Dataset) -> np.ndarray:
    return prior.beta + _sum_by_worker(theta, dataset)


def update_mu(
    prior: PriorState, phi: np.ndarray, theta: np.ndarray, dataset: Dataset
) -> np.ndarray:
    return prior.a + _confusion_counts(phi, theta, dataset)


def update_theta(elog: ELogCache, phi: np.ndarray, dataset: Dataset) -> np.ndarray:
    """theta[n, s] proportional to exp(elog_pi[worker, s] + sum_k phi[task, k] elog_v[s, k, y])."""
    scores = np.empty((dataset.num_annotations, elog.elog_pi.shape[1]))
    for label in range(phi.shape[1]):
        mask = dataset.class_idx == label
        if mask.any():
            scores[mask] = phi[dataset.task_idx[mask]] @ elog.elog_v[:, :, label].T
    scores += elog.elog_pi[dataset.worker_idx]
    return _softmax_rows(scores, "theta")


def update_phi(elog: ELogCache, theta: np.ndarray, dataset: Dataset) -> np.ndarray:
    """phi[i, k] proportional to exp(elog_tau[k] + sum over W_i of theta-weighted elog_v).

    Tasks with no annotations reduce to the softmax of elog_tau alone.
    """
    n_classes = elog.elog_tau.shape[0]
    contrib = np.empty((dataset.num_annotations, n_classes))
    for label in range(n_classes):
        mask = dataset.class_idx == label
        if mask.any():
            contrib[mask] = theta[mask] @ elog.elog_v[:, :, label]
    scores = _sum_by_task(contrib, dataset) + elog.elog_tau[None, :]
    return _softmax_rows(scores, "phi")


# ---------------------------------------------------------------------------
# evidence lower bound
# ---------------------------------------------------------------------------


def _entropy(rows: np.ndarray) -> float:
    return float(-np.sum(np.where(rows > 0.0, rows * np.log(np.where(rows > 0.0, rows, 1.0)), 0.0)))


def compute_elbo(
    prior: PriorState, state: ModelState, elog: ELogCache, dataset: Dataset
) -> float:
    """Evidence lower bound up to an additive constant (the prior normalizers).

    Immediately after the nu/eta/mu updates the Dirichlet coefficient
    groups vanish and the value reduces to the log-Beta and entropy terms.
    """
    counts = _confusion_counts(state.phi, state.theta, dataset)
    terms = {
        "truth-prior": float(
            (prior.u - state.nu + state.phi.sum(axis=0)) @ elog.elog_tau
            + log_beta_rows(state.nu)
        ),
        "worker-mix": float(
            np.sum(
                (prior.beta - state.eta + _sum_by_worker(state.theta, dataset))
                * elog.elog_pi
            )
            + log_beta_rows(state.eta).sum()
        ),
        "confusion": float(
            np.sum((prior.a - state.mu + counts) * elog.elog_v)
            + log_beta_rows(state.mu).sum()
        ),
        "entropy-phi": _entropy(state.phi),
        "entropy-theta": _entropy(state.theta),
    }
    for name, value in terms.items():
        if not np.isfinite(value):
            raise NumericError(f"non-finite ELBO term: {name}")
    return sum(terms.values())


# ---------------------------------------------------------------------------
# fit loop
# ---------------------------------------------------------------------------


def _check_identities(
    prior: PriorState, state: ModelState, dataset: Dataset, sweep: int
) -> None:
    """Count-conservation identities that must hold after every sweep."""
    tol = 1e-9
    checks = {
        "sum(nu) - sum(u) = |T|": abs(
            state.nu.sum() - prior.u.sum() - dataset.num_tasks
        ),
        "sum_s(eta - beta) = |N_j|": float(
            np.max(
                np.abs(
                    (state.eta - prior.beta).sum(axis=1) - dataset.labels_per_worker()
                )
            )
        ),
        "sum(mu - a) = |annotations|": abs(
            (state.mu - prior.a).sum() - dataset.num_annotations
        ),
        "phi rows normalized": float(np.max(np.abs(state.phi.sum(axis=1) - 1.0))),
        "theta rows normalized": float(np.max(np.abs(state.theta.sum(axis=1) - 1.0))),
    }
    for name, err in checks.items():
        if not (err <= tol):
            raise NumericError(f"sweep {sweep}: identity violated ({name}): {err:.3e}")


def fit(
    dataset: Dataset,
    hp: Hyperparams | None = None,
    check_identities: bool = False,
) -> InferenceResult:
    """Run coordinate-ascent inference until phi stabilizes.

    Stops when the largest absolute change of any phi entry between sweeps
    drops below ``hp.xi``, or after ``hp.max_iterations`` sweeps. With
    ``check_identities`` the count-conservation identities are verified
    after every sweep (meant for tests; raises NumericError on violation).
    """
    hp = hp or Hyperparams()
    started = time.perf_counter()
    prior, state = initialize(dataset, hp)

    elbo_trace: list[float] = []
    converged = False
    sweeps = 0
    for sweep in range(1, hp.max_iterations + 1):
        try:
            state.nu = update_nu(prior, state.phi)
            state.eta = update_eta(prior, state.theta, dataset)
            state.mu = update_mu(prior, state.phi, state.theta, dataset)
            elog = compute_elog(state)
            state.theta = update_theta(elog, state.phi, dataset)
            new_phi = update_phi(elog, state.theta, dataset)
        except NumericError as exc:
            raise NumericError(f"sweep {sweep}: {exc}") from exc

        delta = float(np.max(np.abs(new_phi - state.phi)))
        state.phi = new_phi
        sweeps = sweep
        elbo_trace.append(compute_elbo(prior, state, elog, dataset))
        if check_identities:
            _check_identities(prior, state, dataset, sweep)
        logger.info(
            "sweep %d: max|dphi|=%.3e elbo=%.6f", sweep, delta, elbo_trace[-1]
        )
        if delta < hp.xi:
            converged = True
            break

    return InferenceResult(
        predictions=np.argmax(state.phi, axis=1),
        phi=state.phi,
        expected_prototypes=state.mu / state.mu.sum(axis=2, keepdims=True),
        expected_worker_mix=state.eta / state.eta.sum(axis=1, keepdims=True),
        elbo_trace=elbo_trace,
        iterations=sweeps,
        converged=converged,
        wall_time_s=time.perf_counter() - started,
    )


def export_posteriors(result: InferenceResult) -> dict:
    """JSON-ready document with the learned posterior summaries."""
    return {
        "expected_prototypes": result.expected_prototypes.tolist(),
        "expected_worker_mix": result.expected_worker_mix.tolist(),
        "phi": result.phi.tolist(),
        "elbo_trace": list(result.elbo_trace),
        "iterations": result.iterations,
        "converged": result.converged,
    }


def posterior_csv_documents(result: InferenceResult) -> dict[str, str]:
    """CSV variants of the posterior export, one matrix per file."""

    def matrix_csv(mat: np.ndarray) -> str:
        return "\n".join(",".join(repr(x) for x in row) for row in mat.tolist()) + "\n"

    docs = {
        "expected_worker_mix.csv": matrix_csv(result.expected_worker_mix),
        "phi.csv": matrix_csv(result.phi),
    }
    for s in range(result.expected_prototypes.shape[0]):
        docs[f"expected_prototype_{s + 1}.csv"] = matrix_csv(
            result.expected_prototypes[s]
        )
    return docs
