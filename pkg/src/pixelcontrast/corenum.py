"""Dense vector/matrix primitives, stable reductions, and seeded randomness.

All arithmetic is in 64-bit floats. Vectors are 1-D numpy arrays, matrices
are 2-D row-major numpy arrays. Randomness flows from Philox counter-based
generators so that independent substreams can be split off one root seed
deterministically (see :func:`split_rng`).
"""

from __future__ import annotations

import hashlib

import numpy as np

from .errors import DimensionError

NORM_EPS = 1e-12


def as_vector(v) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1:
        raise DimensionError(f"expected a 1-D vector, got shape {v.shape}")
    return v


def dot(a, b) -> float:
    """Inner product of two equal-length vectors."""
    a, b = as_vector(a), as_vector(b)
    if a.shape != b.shape:
        raise DimensionError(f"length mismatch: {a.shape[0]} vs {b.shape[0]}")
    return float(a @ b)


def quad_form(q, s) -> float:
    """Quadratic form q^T S q."""
    q = as_vector(q)
    s = np.asarray(s, dtype=np.float64)
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {s.shape}")
    if s.shape[0] != q.shape[0]:
        raise DimensionError(f"matrix side {s.shape[0]} does not match vector length {q.shape[0]}")
    return float(q @ s @ q)


def l2_normalize(v) -> tuple[np.ndarray, bool]:
    """Return (v / ||v||, False), or (v unchanged, True) when ||v|| <= NORM_EPS.

    Degenerate vectors are passed through rather than raised on: ignore-masked
    pixels legitimately produce zero embeddings in batched layouts.
    """
    v = as_vector(v)
    n = float(np.linalg.norm(v))
    if n > NORM_EPS:
        return v / n, False
    return v.copy(), True


def l2_normalize_rows(x) -> tuple[np.ndarray, np.ndarray]:
    """Row-wise l2_normalize for an (n, d) array; returns (out, degenerate mask)."""
    x = np.asarray(x, dtype=np.float64)
    norms = np.linalg.norm(x, axis=-1, keepdims=True)
    degenerate = norms[..., 0] <= NORM_EPS
    safe = np.where(norms > NORM_EPS, norms, 1.0)
    return x / safe, degenerate


def log_sum_exp(xs) -> float:
    """log(sum(exp(xs))) via max-subtraction; finite for finite inputs."""
    xs = np.asarray(xs, dtype=np.float64)
    if xs.size == 0:
        raise ValueError("log_sum_exp of an empty sequence")
    m = float(np.max(xs))
    return m + float(np.log(np.sum(np.exp(xs - m))))


def cosine_sim(a, b) -> float:
    """Cosine similarity in [-1, 1]; degenerate (zero-norm) inputs yield exactly 0.0."""
    a, b = as_vector(a), as_vector(b)
    if a.shape != b.shape:
        raise DimensionError(f"length mismatch: {a.shape[0]} vs {b.shape[0]}")
    na, nb = float(np.linalg.norm(a)), float(np.linalg.norm(b))
    if na <= NORM_EPS or nb <= NORM_EPS:
        return 0.0
    return float(np.clip(a @ b / (na * nb), -1.0, 1.0))


def _label_words(label: str) -> tuple[int, ...]:
    digest = hashlib.sha256(label.encode("utf-8")).digest()
    return tuple(int.from_bytes(digest[i : i + 4], "little") for i in range(0, 16, 4))


def split_seed(seed: int, label: str) -> np.random.SeedSequence:
    """Deterministic labeled child seed: same (seed, label) -> same stream."""
    return np.random.SeedSequence(entropy=int(seed), spawn_key=_label_words(label))


def make_rng(seed) -> np.random.Generator:
    """Philox generator from an int seed or a SeedSequence."""
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(entropy=int(seed))
    return np.random.Generator(np.random.Philox(seed))


def split_rng(seed: int, label: str) -> np.random.Generator:
    """Philox generator for the labeled substream of a root seed."""
    return make_rng(split_seed(seed, label))
