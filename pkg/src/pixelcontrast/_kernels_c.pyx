# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled kernels: drop-in replacements for `_kernels_py` (same contracts,
same conventions). Fused loops avoid the temporary-array traffic the numpy
versions pay on the small per-iteration workloads of the training loop."""

import numpy as np

from libc.math cimport exp, log, INFINITY

BACKEND = "compiled"


def class_moments(features, labels, int num_classes):
    """Per-class count, mean, population covariance; negative labels ignored."""
    cdef double[:, ::1] f = np.ascontiguousarray(features, dtype=np.float64)
    cdef long long[::1] lab = np.ascontiguousarray(labels, dtype=np.int64)
    cdef Py_ssize_t n = f.shape[0], dim = f.shape[1]
    counts_np = np.zeros(num_classes, dtype=np.int64)
    means_np = np.zeros((num_classes, dim))
    covs_np = np.zeros((num_classes, dim, dim))
    cdef long long[::1] counts = counts_np
    cdef double[:, ::1] means = means_np
    cdef double[:, :, ::1] covs = covs_np
    cdef double[::1] diff = np.zeros(dim)
    cdef Py_ssize_t i, a, b
    cdef long long k
    cdef double da
    for i in range(n):
        k = lab[i]
        if k < 0:
            continue
        counts[k] += 1
        for a in range(dim):
            means[k, a] += f[i, a]
    for k in range(num_classes):
        if counts[k] > 0:
            for a in range(dim):
                means[k, a] /= counts[k]
    for i in range(n):
        k = lab[i]
        if k < 0:
            continue
        for a in range(dim):
            diff[a] = f[i, a] - means[k, a]
        for a in range(dim):
            da = diff[a]
            for b in range(dim):
                covs[k, a, b] += da * diff[b]
    for k in range(num_classes):
        if counts[k] > 0:
            for a in range(dim):
                for b in range(dim):
                    covs[k, a, b] /= counts[k]
    return counts_np, means_np, covs_np


def centroid_contrast(queries, labels, mu, sigma, double tau, active):
    """Per-query softmax contrast against class centroids, optionally with
    Gaussian quadratic logit terms; returns (per_query, d per_query / d q)."""
    cdef double[:, ::1] q = np.ascontiguousarray(queries, dtype=np.float64)
    cdef long long[::1] lab = np.ascontiguousarray(labels, dtype=np.int64)
    cdef double[:, ::1] m = np.ascontiguousarray(mu, dtype=np.float64)
    cdef unsigned char[::1] act = np.ascontiguousarray(active, dtype=np.uint8)
    cdef bint use_sigma = sigma is not None
    cdef double[:, :, ::1] s
    if use_sigma:
        s = np.ascontiguousarray(sigma, dtype=np.float64)
    cdef Py_ssize_t n = q.shape[0], dim = q.shape[1], num_classes = m.shape[0]
    per_np = np.empty(n)
    grads_np = np.empty((n, dim))
    cdef double[::1] per = per_np
    cdef double[:, ::1] grads = grads_np
    cdef double[::1] logits = np.empty(num_classes)
    cdef double[:, ::1] hg = np.empty((num_classes, dim))  # quadratic-term gradients
    cdef Py_ssize_t i, a, b
    cdef long long k, c
    cdef double inv_tau = 1.0 / tau
    cdef double half = 0.5 * inv_tau * inv_tau
    cdef double acc, quad, val, maxv, z, lse, dot_c, p
    for i in range(n):
        maxv = -INFINITY
        for k in range(num_classes):
            if not act[k]:
                continue
            acc = 0.0
            for a in range(dim):
                acc += q[i, a] * m[k, a]
            val = acc * inv_tau
            if use_sigma:
                quad = 0.0
                for a in range(dim):
                    acc = 0.0
                    for b in range(dim):
                        acc += (s[k, a, b] + s[k, b, a]) * q[i, b]
                    hg[k, a] = acc * half
                    quad += q[i, a] * hg[k, a]
                val += 0.5 * quad
            logits[k] = val
            if val > maxv:
                maxv = val
        z = 0.0
        for k in range(num_classes):
            if act[k]:
                z += exp(logits[k] - maxv)
        lse = maxv + log(z)
        c = lab[i]
        dot_c = 0.0
        for a in range(dim):
            dot_c += q[i, a] * m[c, a]
        per[i] = lse - dot_c * inv_tau
        for a in range(dim):
            grads[i, a] = -m[c, a] * inv_tau
        for k in range(num_classes):
            if not act[k]:
                continue
            p = exp(logits[k] - lse)
            if use_sigma:
                for a in range(dim):
                    grads[i, a] += p * (m[k, a] * inv_tau + hg[k, a])
            else:
                for a in range(dim):
                    grads[i, a] += p * m[k, a] * inv_tau
    return per_np, grads_np


cdef inline double logaddexp2_(double x, double y) nogil:
    cdef double m
    if x == -INFINITY:
        return y
    if y == -INFINITY:
        return x
    m = x if x > y else y
    return m + log(exp(x - m) + exp(y - m))


def bank_contrast(queries, labels, entries, offsets, double tau):
    """Per-query contrast against per-class queue entries (queue k occupies
    rows offsets[k]:offsets[k+1] of `entries`)."""
    cdef double[:, ::1] q = np.ascontiguousarray(queries, dtype=np.float64)
    cdef long long[::1] lab = np.ascontiguousarray(labels, dtype=np.int64)
    cdef double[:, ::1] e = np.ascontiguousarray(entries, dtype=np.float64)
    cdef long long[::1] off = np.ascontiguousarray(offsets, dtype=np.int64)
    cdef Py_ssize_t n = q.shape[0], dim = q.shape[1]
    cdef Py_ssize_t num_classes = off.shape[0] - 1
    cdef Py_ssize_t total = e.shape[0]
    per_np = np.empty(n)
    grads_np = np.zeros((n, dim))
    cdef double[::1] per = per_np
    cdef double[:, ::1] grads = grads_np
    cdef double[::1] sims = np.empty(total)
    cdef double[::1] log_mean = np.empty(num_classes)
    cdef double[::1] lterms = np.empty(total)  # sized >= any queue length
    cdef double inv_tau = 1.0 / tau
    cdef Py_ssize_t i, a, j, lo, hi, count
    cdef long long k, c
    cdef double acc, maxv, z, log_d, w, coef, mean_loss, log_c2
    for i in range(n):
        c = lab[i]
        for j in range(total):
            acc = 0.0
            for a in range(dim):
                acc += q[i, a] * e[j, a]
            sims[j] = acc * inv_tau
        for k in range(num_classes):
            lo, hi = off[k], off[k + 1]
            if hi == lo:
                log_mean[k] = -INFINITY
                continue
            maxv = -INFINITY
            for j in range(lo, hi):
                if sims[j] > maxv:
                    maxv = sims[j]
            z = 0.0
            for j in range(lo, hi):
                z += exp(sims[j] - maxv)
            log_mean[k] = maxv + log(z) - log(hi - lo)
        log_d = -INFINITY
        for k in range(num_classes):
            if k != c:
                log_d = logaddexp2_(log_d, log_mean[k])
        lo, hi = off[c], off[c + 1]
        count = hi - lo
        mean_loss = 0.0
        log_c2 = -INFINITY
        for j in range(count):
            lterms[j] = logaddexp2_(sims[lo + j], log_d)
            mean_loss += lterms[j] - sims[lo + j]
            log_c2 = logaddexp2_(log_c2, -lterms[j])
        per[i] = mean_loss / count
        log_c2 -= log(count)
        # positives: (w_m - 1)/M each; negatives: e^{s}/N_k * mean_m (e^{s_m}+D)^-1
        for j in range(count):
            w = (exp(sims[lo + j] - lterms[j]) - 1.0) / count
            for a in range(dim):
                grads[i, a] += w * e[lo + j, a]
        for k in range(num_classes):
            if k == c or off[k + 1] == off[k]:
                continue
            for j in range(off[k], off[k + 1]):
                coef = exp(sims[j] - log(off[k + 1] - off[k]) + log_c2)
                for a in range(dim):
                    grads[i, a] += coef * e[j, a]
        for a in range(dim):
            grads[i, a] *= inv_tau
    return per_np, grads_np
