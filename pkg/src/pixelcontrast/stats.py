"""Per-class streaming mean and covariance over teacher-provided features.

Layout conventions used throughout the package:
  * a feature grid is an (H, W, A) float64 array;
  * a label grid is an (H, W) integer array with values in [0, K) or
    IGNORE_LABEL for pixels that belong to no class.

The streaming update uses the population-covariance convention (divide by
the batch pixel count): under it the pooled update is an exact identity,
so any batch partition of a pixel stream reproduces the one-shot statistics.
"""

from __future__ import annotations

import json

import numpy as np

from .backend import kernels
from .errors import DimensionError, StateError

IGNORE_LABEL = -1

STATS_SNAPSHOT_VERSION = 1


def downsample_labels(labels: np.ndarray, target_h: int, target_w: int) -> np.ndarray:
    """Nearest-neighbor label downsample; source index = floor(i * H / target_h)."""
    labels = np.asarray(labels)
    if target_h <= 0 or target_w <= 0:
        raise ValueError("target dims must be positive")
    h, w = labels.shape
    if target_h > h or target_w > w:
        raise ValueError(f"target dims ({target_h}, {target_w}) exceed source ({h}, {w})")
    rows = (np.arange(target_h) * h) // target_h
    cols = (np.arange(target_w) * w) // target_w
    return labels[np.ix_(rows, cols)]


def _flatten_masked(feat: np.ndarray, mask: np.ndarray):
    feat = np.asarray(feat, dtype=np.float64)
    mask = np.asarray(mask)
    if feat.shape[:2] != mask.shape:
        raise DimensionError(f"feature grid {feat.shape[:2]} vs mask {mask.shape}")
    return feat.reshape(-1, feat.shape[-1]), mask.reshape(-1).astype(np.int64)


def local_centroids(feat: np.ndarray, mask: np.ndarray) -> dict[int, tuple[np.ndarray, int]]:
    """Mean feature vector and pixel count of each class present in the mask."""
    flat, lab = _flatten_masked(feat, mask)
    num_classes = int(lab.max()) + 1 if lab.size and lab.max() >= 0 else 0
    if num_classes == 0:
        return {}
    counts, means, _ = kernels.class_moments(flat, lab, num_classes)
    return {k: (means[k].copy(), int(counts[k])) for k in range(num_classes) if counts[k] > 0}


def local_moments(feat: np.ndarray, mask: np.ndarray, num_classes: int):
    """Per-class (centroid, population covariance, count) for one image.

    Classes absent from the mask are omitted, like local_centroids.
    """
    flat, lab = _flatten_masked(feat, mask)
    counts, means, covs = kernels.class_moments(flat, lab, num_classes)
    return {
        k: (means[k].copy(), covs[k].copy(), int(counts[k]))
        for k in range(num_classes)
        if counts[k] > 0
    }


class ClassStats:
    """Running per-class pixel count, mean, and covariance (all zero-initialized).

    `update_cov` is the atomic full update: covariance first (it needs the
    pre-update mean), then count, then mean. `update_mean` alone leaves the
    count untouched so mean-only consumers must `commit_count` afterwards.
    """

    def __init__(self, num_classes: int, dim: int):
        self.num_classes = num_classes
        self.dim = dim
        self.count = np.zeros(num_classes, dtype=np.int64)
        self.mean = np.zeros((num_classes, dim))
        self.cov = np.zeros((num_classes, dim, dim))

    @property
    def initialized(self) -> np.ndarray:
        return self.count > 0

    def _check(self, k: int, centroid: np.ndarray, m: int) -> np.ndarray:
        if not 0 <= k < self.num_classes:
            raise ValueError(f"class index {k} out of range")
        if m <= 0:
            raise ValueError("batch pixel count must be positive")
        centroid = np.asarray(centroid, dtype=np.float64)
        if centroid.shape != (self.dim,):
            raise DimensionError(f"centroid shape {centroid.shape}, expected ({self.dim},)")
        return centroid

    def update_mean(self, k: int, centroid: np.ndarray, m: int) -> None:
        centroid = self._check(k, centroid, m)
        n = self.count[k]
        self.mean[k] = (n * self.mean[k] + m * centroid) / (n + m)

    def commit_count(self, k: int, m: int) -> None:
        if m <= 0:
            raise ValueError("batch pixel count must be positive")
        self.count[k] += m

    def update_cov(self, k: int, centroid: np.ndarray, batch_cov: np.ndarray, m: int) -> None:
        centroid = self._check(k, centroid, m)
        batch_cov = np.asarray(batch_cov, dtype=np.float64)
        if batch_cov.shape != (self.dim, self.dim):
            raise DimensionError(f"batch covariance shape {batch_cov.shape}")
        n = self.count[k]
        delta = self.mean[k] - centroid
        self.cov[k] = (n * self.cov[k] + m * batch_cov) / (n + m) + (
            n * m / float(n + m) ** 2
        ) * np.outer(delta, delta)
        new_mean = (n * self.mean[k] + m * centroid) / (n + m)
        self.count[k] = n + m
        self.mean[k] = new_mean

    def update_batch(self, feat: np.ndarray, mask: np.ndarray, with_cov: bool = True) -> None:
        """Fold one image's per-class moments into the running statistics."""
        for k, (centroid, cov, m) in local_moments(feat, mask, self.num_classes).items():
            if with_cov:
                self.update_cov(k, centroid, cov, m)
            else:
                self.update_mean(k, centroid, m)
                self.commit_count(k, m)

    def prototypes(self) -> tuple[np.ndarray, np.ndarray]:
        """All K mean vectors plus the initialized mask (count > 0)."""
        return self.mean.copy(), self.initialized.copy()

    def require_initialized(self, classes) -> None:
        missing = [int(k) for k in classes if self.count[k] == 0]
        if missing:
            raise StateError(f"statistics not initialized for classes {missing}")

    def copy(self) -> "ClassStats":
        out = ClassStats(self.num_classes, self.dim)
        out.count = self.count.copy()
        out.mean = self.mean.copy()
        out.cov = self.cov.copy()
        return out

    def to_json(self) -> dict:
        return {
            "version": STATS_SNAPSHOT_VERSION,
            "num_classes": self.num_classes,
            "dim": self.dim,
            "count": self.count.tolist(),
            "mean": self.mean.tolist(),
            "cov": self.cov.tolist(),
        }

    @classmethod
    def from_json(cls, payload: dict) -> "ClassStats":
        if payload.get("version") != STATS_SNAPSHOT_VERSION:
            raise ValueError(f"unsupported stats snapshot version {payload.get('version')}")
        out = cls(payload["num_classes"], payload["dim"])
        out.count = np.asarray(payload["count"], dtype=np.int64)
        out.mean = np.asarray(payload["mean"], dtype=np.float64).reshape(out.num_classes, out.dim)
        out.cov = np.asarray(payload["cov"], dtype=np.float64).reshape(
            out.num_classes, out.dim, out.dim
        )
        return out

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)

    @classmethod
    def loads(cls, text: str) -> "ClassStats":
        return cls.from_json(json.loads(text))
