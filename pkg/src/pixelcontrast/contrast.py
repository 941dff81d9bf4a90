"""Contrastive objectives over class-level semantic concepts.

Three variants share one softmax-form shape: queries are contrasted against
global class prototypes (`proto_loss`), against per-class FIFO queues of
local centroids (`bank_loss`), or against class Gaussians through a
closed-form Jensen upper bound on the infinite-pair loss (`dist_loss`).
`mc_infinite_loss` is the Monte-Carlo estimator of the infinite-pair loss
itself, used to certify the bound. `reg_loss` is the softmax regularizer on
an image's mean embedding.

Gradients are with respect to queries only; prototypes, queues, and
statistics come from the teacher side and are treated as constants.
All losses average over the query set, and `grads[i]` is the gradient of
that averaged value with respect to query i.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .backend import kernels
from .bank import CentroidBank
from .errors import NumericError, StateError
from .stats import ClassStats

PSD_EIG_TOL = -1e-8


def _check_tau(tau: float) -> float:
    tau = float(tau)
    if not tau > 0:
        raise ValueError("temperature must be positive")
    return tau


@dataclass
class QuerySet:
    """Pixel queries: (n, A) unit-norm embeddings plus their class labels."""

    queries: np.ndarray
    labels: np.ndarray
    validate: bool = True

    def __post_init__(self):
        self.queries = np.asarray(self.queries, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.queries.ndim != 2 or self.labels.shape != (self.queries.shape[0],):
            raise ValueError("queries must be (n, A) with labels (n,)")
        if np.any(self.labels < 0):
            raise ValueError("query labels must be non-negative")
        if self.validate and self.queries.size:
            norms = np.linalg.norm(self.queries, axis=1)
            if np.any(np.abs(norms - 1.0) > 1e-9):
                raise ValueError("queries must be l2-normalized to 1e-9")

    def __len__(self) -> int:
        return self.queries.shape[0]


@dataclass
class LossValue:
    value: float
    grads: np.ndarray
    per_query: np.ndarray = field(default=None, repr=False)


def _require_contrastable(labels: np.ndarray, active: np.ndarray, what: str) -> None:
    if active.sum() < 2:
        raise StateError(f"{what} needs at least 2 initialized classes")
    inactive = ~active[labels]
    if np.any(inactive):
        bad = sorted(set(labels[inactive].tolist()))
        raise StateError(f"{what} queries reference uninitialized classes {bad}")


def proto_loss(queries: QuerySet, prototypes: np.ndarray, tau: float,
               initialized: np.ndarray | None = None) -> LossValue:
    """Softmax contrast of each query against the global class prototypes."""
    tau = _check_tau(tau)
    prototypes = np.asarray(prototypes, dtype=np.float64)
    if initialized is None:
        initialized = np.ones(prototypes.shape[0], dtype=bool)
    _require_contrastable(queries.labels, initialized, "proto_loss")
    per_query, grads = kernels.centroid_contrast(
        queries.queries, queries.labels, prototypes, None, tau, initialized
    )
    n = len(queries)
    return LossValue(float(np.mean(per_query)), grads / n, per_query)


def dist_loss(queries: QuerySet, stats: ClassStats, tau: float) -> LossValue:
    """Closed-form upper bound of the infinite-pair contrast under per-class
    Gaussians: logits gain q^T Sigma q / (2 tau^2) and the positive class
    contributes its quadratic term additively."""
    tau = _check_tau(tau)
    active = stats.initialized
    _require_contrastable(queries.labels, active, "dist_loss")
    per_query, grads = kernels.centroid_contrast(
        queries.queries, queries.labels, stats.mean, stats.cov, tau, active
    )
    n = len(queries)
    return LossValue(float(np.mean(per_query)), grads / n, per_query)


def bank_loss(queries: QuerySet, bank: CentroidBank, tau: float) -> LossValue:
    """Contrast against queue entries: positives are averaged in log space
    outside the softmax (one term per positive), negatives as the per-class
    mean of exponentials."""
    tau = _check_tau(tau)
    sizes = bank.sizes()
    nonempty = sizes > 0
    for c in sorted(set(queries.labels.tolist())):
        if sizes[c] == 0:
            raise StateError(f"bank_loss requires a nonempty queue for class {c}")
        if not np.any(nonempty & (np.arange(bank.num_classes) != c)):
            raise StateError(f"bank_loss has no nonempty negative queue for class {c}")
    entries, offsets = bank.packed()
    per_query, grads = kernels.bank_contrast(
        queries.queries, queries.labels, entries, offsets, tau
    )
    n = len(queries)
    return LossValue(float(np.mean(per_query)), grads / n, per_query)


def reg_loss(mean_feature: np.ndarray, prototypes: np.ndarray, tau: float,
             initialized: np.ndarray | None = None) -> LossValue:
    """Normalized sum of per-class log-softmax of the image's mean embedding
    against the prototypes; equals -1 exactly when the softmax is uniform.

    Implemented verbatim (minimizing it concentrates the softmax); callers
    that want the diversity-promoting direction negate it.
    """
    tau = _check_tau(tau)
    q = np.asarray(mean_feature, dtype=np.float64)
    prototypes = np.asarray(prototypes, dtype=np.float64)
    if initialized is None:
        initialized = np.ones(prototypes.shape[0], dtype=bool)
    mu = prototypes[initialized]
    k = mu.shape[0]
    if k < 2:
        raise StateError("reg_loss needs at least 2 initialized classes")
    s = mu @ q / tau
    m = s.max()
    z = np.exp(s - m)
    lse = m + np.log(z.sum())
    p = z / z.sum()
    scale = 1.0 / (k * np.log(k))
    value = scale * float(np.sum(s - lse))
    grad = scale / tau * (mu.sum(axis=0) - k * (p @ mu))
    return LossValue(value, grad[None, :], np.array([value]))


def aggregate_cl(per_query_losses) -> float:
    """Mean per-query loss over the pooled query set (the union of domains)."""
    per_query_losses = np.asarray(per_query_losses, dtype=np.float64)
    if per_query_losses.size == 0:
        raise ValueError("aggregate_cl of an empty query set")
    return float(np.mean(per_query_losses))


def _psd_sample_transform(cov: np.ndarray) -> np.ndarray:
    """Matrix square root of a PSD covariance; raises NumericError otherwise."""
    w, v = np.linalg.eigh(cov)
    scale = max(1.0, float(np.max(np.abs(w))))
    if np.min(w) < PSD_EIG_TOL * scale:
        raise NumericError(f"covariance has negative eigenvalue {np.min(w):.3e}")
    return v * np.sqrt(np.clip(w, 0.0, None))


def mc_infinite_loss(query: np.ndarray, label: int, stats: ClassStats, tau: float,
                     samples: int, rng: np.random.Generator,
                     n_bootstrap: int = 100) -> tuple[float, float]:
    """Nested Monte-Carlo estimate of the infinite-pair contrast loss.

    Positives and each negative class get independent Gaussian sample pools
    (inner expectations use their own pools, per the nested structure of the
    limit); the returned stderr is a bootstrap over all pools jointly.
    """
    tau = _check_tau(tau)
    if samples < 10_000:
        raise ValueError("mc_infinite_loss needs at least 1e4 samples")
    query = np.asarray(query, dtype=np.float64)
    active = stats.initialized
    labels_arr = np.array([label])
    _require_contrastable(labels_arr, active, "mc_infinite_loss")
    neg_classes = [k for k in range(stats.num_classes) if active[k] and k != label]

    def draw_scores(k: int) -> np.ndarray:
        root = _psd_sample_transform(stats.cov[k])
        x = stats.mean[k] + rng.standard_normal((samples, stats.dim)) @ root.T
        return x @ query / tau

    s_neg = np.stack([draw_scores(k) for k in neg_classes])  # (Kn, S)
    s_pos = draw_scores(label)  # (S,)

    def estimate(neg: np.ndarray, pos: np.ndarray) -> float:
        m = neg.max(axis=1)
        log_mean = m + np.log(np.mean(np.exp(neg - m[:, None]), axis=1))  # (Kn,)
        mm = log_mean.max()
        log_d = mm + np.log(np.sum(np.exp(log_mean - mm)))
        return float(np.mean(np.logaddexp(pos, log_d) - pos))

    est = estimate(s_neg, s_pos)
    if n_bootstrap <= 0:
        return est, float("nan")
    boots = np.empty(n_bootstrap)
    for b in range(n_bootstrap):
        idx_n = rng.integers(0, samples, size=(len(neg_classes), samples))
        idx_p = rng.integers(0, samples, size=samples)
        boots[b] = estimate(np.take_along_axis(s_neg, idx_n, axis=1), s_pos[idx_p])
    return est, float(np.std(boots, ddof=1))
