"""Segmentation metrics: confusion matrix, per-class IoU / mIoU, the
pixel-wise discrimination distance diagnostic, and embedding export."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corenum import l2_normalize_rows
from .errors import DimensionError
from .stats import IGNORE_LABEL

PDD_EPS = 1e-6


def confusion(pred: np.ndarray, truth: np.ndarray, num_classes: int) -> np.ndarray:
    """(K, K) counts indexed [predicted, true]; IGNORE truth pixels skipped."""
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.shape != truth.shape:
        raise DimensionError(f"prediction {pred.shape} vs truth {truth.shape}")
    valid = truth != IGNORE_LABEL
    idx = pred[valid].astype(np.int64) * num_classes + truth[valid].astype(np.int64)
    counts = np.bincount(idx, minlength=num_classes * num_classes)
    return counts.reshape(num_classes, num_classes)


def miou(cm: np.ndarray) -> tuple[np.ndarray, float]:
    """Per-class IoU (nan where the union is empty) and the mean over the
    classes that appear."""
    cm = np.asarray(cm, dtype=np.float64)
    tp = np.diag(cm)
    union = cm.sum(axis=0) + cm.sum(axis=1) - tp
    iou = np.full(cm.shape[0], np.nan)
    present = union > 0
    iou[present] = tp[present] / union[present]
    mean = float(np.mean(iou[present])) if np.any(present) else float("nan")
    return iou, mean


def pixel_accuracy(cm: np.ndarray) -> float:
    cm = np.asarray(cm, dtype=np.float64)
    total = cm.sum()
    return float(np.diag(cm).sum() / total) if total > 0 else float("nan")


@dataclass
class PddReport:
    values: dict[int, float]
    counts: dict[int, int]

    def mean(self) -> float:
        return float(np.mean(list(self.values.values()))) if self.values else float("nan")


def pdd(features: np.ndarray, labels: np.ndarray, prototypes: np.ndarray,
        eps: float = PDD_EPS) -> PddReport:
    """Per-class mean of  sim(x, own prototype) / (sum of clamped cross-class
    sims + eps)  under cosine similarity. Negative cross-class similarities
    are clamped to 0 so the score stays positive and monotone.
    """
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels)
    flat = features.reshape(-1, features.shape[-1])
    lab = labels.reshape(-1)
    if flat.shape[0] != lab.shape[0]:
        raise DimensionError("feature/label pixel counts differ")
    unit_f, _ = l2_normalize_rows(flat)
    unit_p, _ = l2_normalize_rows(np.asarray(prototypes, dtype=np.float64))
    sims = unit_f @ unit_p.T  # (n, K)
    num_classes = unit_p.shape[0]
    values: dict[int, float] = {}
    counts: dict[int, int] = {}
    for k in range(num_classes):
        sel = lab == k
        if not np.any(sel):
            continue
        s = sims[sel]
        numer = s[:, k]
        others = np.delete(np.clip(s, 0.0, None), k, axis=1)
        values[k] = float(np.mean(numer / (others.sum(axis=1) + eps)))
        counts[k] = int(sel.sum())
    return PddReport(values, counts)


def export_embeddings(features: np.ndarray, labels: np.ndarray, path) -> str:
    """CSV rows  pixel index, class, embedding coordinates  for every pixel
    that carries a label; floats use round-trip decimal encoding."""
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels)
    flat = features.reshape(-1, features.shape[-1])
    lab = labels.reshape(-1)
    if flat.shape[0] != lab.shape[0]:
        raise DimensionError("feature/label pixel counts differ")
    dim = flat.shape[1]
    header = "pixel,class," + ",".join(f"e{j}" for j in range(dim))
    lines = [header]
    for i in range(flat.shape[0]):
        if lab[i] == IGNORE_LABEL:
            continue
        coords = ",".join(repr(float(v)) for v in flat[i])
        lines.append(f"{i},{int(lab[i])},{coords}")
    path = str(path)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    return path
