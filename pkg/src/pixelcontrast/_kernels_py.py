"""Pure-numpy kernels for the hot inner loops.

This is the reference backend; `pixelcontrast._kernels_c` is a Cython
drop-in compiled at install time when possible. Both expose the same three
functions and are interchangeable up to floating-point summation order.

Conventions shared by both backends:
  * `queries` is (n, A) float64, `labels` is (n,) int64 with labels[i] < K;
  * per-query gradients are d(per_query[i]) / d(queries[i]) (no 1/n factor);
  * class statistics use the population covariance (divide by the count).
"""

from __future__ import annotations

import numpy as np

BACKEND = "python"


def class_moments(features: np.ndarray, labels: np.ndarray, num_classes: int):
    """Per-class count, mean, and population covariance of a pixel batch.

    Negative labels are ignored. Classes without pixels get zero mean/cov.
    Returns (counts (K,), means (K, A), covs (K, A, A)).
    """
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    dim = features.shape[1]
    counts = np.zeros(num_classes, dtype=np.int64)
    means = np.zeros((num_classes, dim))
    covs = np.zeros((num_classes, dim, dim))
    valid = labels >= 0
    counts += np.bincount(labels[valid], minlength=num_classes)
    for k in range(num_classes):
        if counts[k] == 0:
            continue
        x = features[labels == k]
        mu = x.mean(axis=0)
        d = x - mu
        means[k] = mu
        covs[k] = d.T @ d / counts[k]
    return counts, means, covs


def centroid_contrast(
    queries: np.ndarray,
    labels: np.ndarray,
    mu: np.ndarray,
    sigma: np.ndarray | None,
    tau: float,
    active: np.ndarray,
):
    """Softmax contrast of queries against class centroids (optionally with
    Gaussian second-moment terms).

    With sigma=None the per-query loss is log sum_k e^{q.mu_k/tau} - q.mu_c/tau
    over active classes k; with sigma the logits gain q^T Sigma_k q / (2 tau^2)
    and the loss keeps its closed-form shape (the positive quadratic terms
    cancel, leaving the same  lse - q.mu_c/tau  structure).
    Returns (per_query (n,), grads (n, A)).
    """
    queries = np.asarray(queries, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    n = queries.shape[0]
    inv_tau = 1.0 / tau
    logits = queries @ mu.T * inv_tau
    if sigma is not None:
        sym = sigma + np.transpose(sigma, (0, 2, 1))
        half_grad = np.einsum("kab,nb->nka", sym, queries) * (0.5 * inv_tau * inv_tau)
        logits = logits + 0.5 * np.einsum("na,nka->nk", queries, half_grad)
    masked = np.where(active[None, :], logits, -np.inf)
    m = masked.max(axis=1)
    p = np.exp(masked - m[:, None])
    z = p.sum(axis=1)
    lse = m + np.log(z)
    p /= z[:, None]
    per_query = lse - np.einsum("na,na->n", queries, mu[labels]) * inv_tau
    grads = (p @ mu) * inv_tau - mu[labels] * inv_tau
    if sigma is not None:
        grads += np.einsum("nk,nka->na", p, half_grad)
    return per_query, grads


def bank_contrast(
    queries: np.ndarray,
    labels: np.ndarray,
    entries: np.ndarray,
    offsets: np.ndarray,
    tau: float,
):
    """Contrast of queries against per-class FIFO queue entries.

    `entries` is the concatenation of all queues; queue k occupies rows
    offsets[k]:offsets[k+1]. Per query: the positives are its own class's
    entries, the negative mass is the per-class mean of e^{q.e/tau} summed
    over the other nonempty queues. Returns (per_query (n,), grads (n, A)).
    """
    queries = np.asarray(queries, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    offsets = np.asarray(offsets, dtype=np.int64)
    n, dim = queries.shape
    num_classes = offsets.shape[0] - 1
    sizes = np.diff(offsets)
    inv_tau = 1.0 / tau
    sims = queries @ entries.T * inv_tau  # (n, total)

    # log of the per-class mean of e^{sims} (rows: queries), -inf for empty queues
    log_mean = np.full((n, num_classes), -np.inf)
    for k in range(num_classes):
        lo, hi = offsets[k], offsets[k + 1]
        if hi > lo:
            block = sims[:, lo:hi]
            mk = block.max(axis=1)
            log_mean[:, k] = mk + np.log(np.exp(block - mk[:, None]).sum(axis=1)) - np.log(hi - lo)

    per_query = np.empty(n)
    grads = np.empty((n, dim))
    for i in range(n):
        c = labels[i]
        lo, hi = offsets[c], offsets[c + 1]
        pos = sims[i, lo:hi]  # (M,)
        neg_mask = np.arange(num_classes) != c
        neg_logs = log_mean[i, neg_mask]
        neg_logs = neg_logs[np.isfinite(neg_logs)]
        log_d = -np.inf if neg_logs.size == 0 else _lse(neg_logs)
        lterms = np.logaddexp(pos, log_d)  # log(e^{s_m} + D)
        per_query[i] = np.mean(lterms - pos)
        # gradient: positives get (w_m - 1)/M, each negative entry e gets
        # e^{s_e}/N_k * mean_m 1/(e^{s_m} + D); everything scaled by 1/tau
        w = np.exp(pos - lterms)
        g = ((w - 1.0) / pos.shape[0]) @ entries[lo:hi]
        log_c2 = _lse(-lterms) - np.log(pos.shape[0])  # log mean_m (e^{s_m}+D)^-1
        for k in range(num_classes):
            if k == c or sizes[k] == 0:
                continue
            ko, kh = offsets[k], offsets[k + 1]
            coef = np.exp(sims[i, ko:kh] - np.log(sizes[k]) + log_c2)
            g = g + coef @ entries[ko:kh]
        grads[i] = g * inv_tau
    return per_query, grads


def _lse(x: np.ndarray) -> float:
    m = np.max(x)
    return float(m + np.log(np.sum(np.exp(x - m))))
