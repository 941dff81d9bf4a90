"""Per-class FIFO queues of local source centroids (the dictionary of
recent image-level class means, shared capacity for every class)."""

from __future__ import annotations

from collections import deque

import numpy as np

from .errors import DimensionError


class CentroidBank:
    def __init__(self, num_classes: int, dim: int, capacity: int = 200):
        if capacity <= 0:
            raise ValueError("capacity must be positive")
        self.num_classes = num_classes
        self.dim = dim
        self.capacity = capacity
        self._queues = [deque(maxlen=capacity) for _ in range(num_classes)]

    def enqueue(self, k: int, centroid: np.ndarray) -> None:
        """Append to queue k, evicting the oldest entry at capacity."""
        if not 0 <= k < self.num_classes:
            raise ValueError(f"class index {k} out of range")
        centroid = np.asarray(centroid, dtype=np.float64)
        if centroid.shape != (self.dim,):
            raise DimensionError(f"centroid shape {centroid.shape}, expected ({self.dim},)")
        if not np.all(np.isfinite(centroid)):
            raise ValueError("centroid must be finite")
        self._queues[k].append(centroid.copy())

    def snapshot(self, k: int) -> np.ndarray:
        """Copy of queue k's contents, oldest first; (size, dim), possibly empty."""
        q = self._queues[k]
        if not q:
            return np.zeros((0, self.dim))
        return np.array(q, dtype=np.float64)

    def size(self, k: int) -> int:
        return len(self._queues[k])

    def sizes(self) -> np.ndarray:
        return np.array([len(q) for q in self._queues], dtype=np.int64)

    def packed(self) -> tuple[np.ndarray, np.ndarray]:
        """All queues concatenated plus offsets, the layout the kernels use."""
        sizes = self.sizes()
        offsets = np.zeros(self.num_classes + 1, dtype=np.int64)
        np.cumsum(sizes, out=offsets[1:])
        if offsets[-1] == 0:
            return np.zeros((0, self.dim)), offsets
        entries = np.concatenate([self.snapshot(k) for k in range(self.num_classes) if sizes[k]])
        return entries, offsets

    def to_json(self) -> dict:
        return {
            "version": 1,
            "num_classes": self.num_classes,
            "dim": self.dim,
            "capacity": self.capacity,
            "queues": [[v.tolist() for v in q] for q in self._queues],
        }

    @classmethod
    def from_json(cls, payload: dict) -> "CentroidBank":
        if payload.get("version") != 1:
            raise ValueError(f"unsupported bank snapshot version {payload.get('version')}")
        out = cls(payload["num_classes"], payload["dim"], payload["capacity"])
        for k, entries in enumerate(payload["queues"]):
            for v in entries:
                out.enqueue(k, np.asarray(v, dtype=np.float64))
        return out
