"""Self-training machinery: pseudo labels, image-level confidence weighting,
cross-entropy losses with ignore support, the EMA teacher update,
class-balanced cropping, rare-class source sampling, and the weak/strong
input augmentations used by the toy benchmark.

Cross-entropy gradients are returned with respect to logits (softmax folded
in), since that is what the model backward consumes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .contrast import LossValue
from .errors import DimensionError
from .stats import IGNORE_LABEL


def _ce_value_and_grad(probs: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels)
    if probs.shape[:2] != labels.shape:
        raise DimensionError(f"probability grid {probs.shape[:2]} vs labels {labels.shape}")
    valid = labels != IGNORE_LABEL
    grad = np.zeros_like(probs)
    n_valid = int(valid.sum())
    if n_valid == 0:
        return 0.0, grad
    rows, cols = np.nonzero(valid)
    picked = probs[rows, cols, labels[rows, cols]]
    value = -float(np.sum(np.log(picked))) / n_valid
    grad[rows, cols, :] = probs[rows, cols, :] / n_valid
    grad[rows, cols, labels[rows, cols]] -= 1.0 / n_valid
    return value, grad


def source_ce(probs: np.ndarray, labels: np.ndarray) -> LossValue:
    """Cross-entropy against ground-truth labels, averaged over the pixels
    that carry a label (reduces to 1/HW when nothing is ignored)."""
    value, grad = _ce_value_and_grad(probs, labels)
    return LossValue(value, grad)


def pseudo_labels(teacher_probs: np.ndarray) -> np.ndarray:
    """Per-pixel argmax; ties go to the lowest class index."""
    return np.argmax(np.asarray(teacher_probs), axis=-1).astype(np.int64)


def confidence_weight(teacher_probs: np.ndarray, alpha: float) -> float:
    """Fraction of pixels whose max softmax probability exceeds alpha,
    over the full H*W pixel count."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must be in (0, 1)")
    probs = np.asarray(teacher_probs, dtype=np.float64)
    h, w = probs.shape[:2]
    return float(np.count_nonzero(probs.max(axis=-1) > alpha)) / (h * w)


def target_ssl(student_probs: np.ndarray, pseudo: np.ndarray, w: float) -> LossValue:
    """Confidence-weighted cross-entropy against pseudo labels."""
    if not 0.0 <= w <= 1.0:
        raise ValueError("confidence weight must be in [0, 1]")
    if w == 0.0:
        probs = np.asarray(student_probs, dtype=np.float64)
        if probs.shape[:2] != np.asarray(pseudo).shape:
            raise DimensionError("probability grid vs pseudo label shape mismatch")
        return LossValue(0.0, np.zeros_like(probs))
    value, grad = _ce_value_and_grad(student_probs, pseudo)
    return LossValue(w * value, w * grad)


def ema_update(teacher: dict[str, np.ndarray], student: dict[str, np.ndarray], beta: float) -> None:
    """teacher <- beta * teacher + (1 - beta) * student, elementwise, in place."""
    if not 0.0 <= beta < 1.0:
        raise ValueError("beta must be in [0, 1)")
    if teacher.keys() != student.keys():
        raise DimensionError("teacher/student parameter sets do not match")
    for name, t in teacher.items():
        s = student[name]
        if t.shape != s.shape:
            raise DimensionError(f"shape mismatch for {name}: {t.shape} vs {s.shape}")
        t *= beta
        t += (1.0 - beta) * s


@dataclass(frozen=True)
class CropBox:
    top: int
    left: int
    height: int
    width: int

    def apply(self, grid: np.ndarray) -> np.ndarray:
        return grid[self.top : self.top + self.height, self.left : self.left + self.width]


def class_balanced_crop(
    labels: np.ndarray,
    crop_h: int,
    crop_w: int,
    cat_max_ratio: float,
    trials: int,
    rng: np.random.Generator,
) -> CropBox:
    """Scored random cropping: among `trials` uniform boxes, prefer the one
    with the most diverse class histogram, scoring 0 whenever one class
    exceeds cat_max_ratio. Ties keep the earlier box (strict improvement
    only); the first candidate always replaces the -1 sentinel.
    """
    labels = np.asarray(labels)
    h, w = labels.shape
    if crop_h > h or crop_w > w or crop_h <= 0 or crop_w <= 0:
        raise ValueError(f"crop ({crop_h}, {crop_w}) does not fit image ({h}, {w})")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    best_score, best_box = -1.0, None
    for _ in range(trials):
        top = int(rng.integers(0, h - crop_h + 1))
        left = int(rng.integers(0, w - crop_w + 1))
        window = labels[top : top + crop_h, left : left + crop_w]
        vals = window[window != IGNORE_LABEL]
        score = 0.0
        if vals.size:
            cnt = np.bincount(vals)
            cnt = cnt[cnt > 0]
            if cnt.max() / cnt.sum() < cat_max_ratio:
                score = float(np.sum(np.log(cnt)))
        if score > best_score:
            best_score, best_box = score, CropBox(top, left, crop_h, crop_w)
    return best_box


def rare_class_probabilities(class_counts: np.ndarray, temperature: float = 1.0) -> np.ndarray:
    """Image sampling probabilities favoring images whose rarest present
    class is globally rare: softmax of -log(global frequency of the rarest
    class present) / T. Images with no labeled pixels get probability 0.
    """
    counts = np.asarray(class_counts, dtype=np.float64)
    if counts.ndim != 2 or counts.shape[0] == 0:
        raise ValueError("class_counts must be (n_images, num_classes) and nonempty")
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    freqs = counts.sum(axis=0)
    if not np.any(freqs > 0):
        raise ValueError("no class has positive frequency")
    rarest = np.full(counts.shape[0], np.inf)
    for i in range(counts.shape[0]):
        present = counts[i] > 0
        if np.any(present):
            rarest[i] = freqs[present].min()
    logits = np.where(np.isfinite(rarest), -np.log(rarest) / temperature, -np.inf)
    m = logits[np.isfinite(logits)].max()
    z = np.exp(logits - m)
    return z / z.sum()


def rare_class_sample(class_counts: np.ndarray, temperature: float, rng: np.random.Generator) -> int:
    return int(rng.choice(class_counts.shape[0], p=rare_class_probabilities(class_counts, temperature)))


def weak_augment(
    inputs: np.ndarray, labels: np.ndarray, rng: np.random.Generator, flip_prob: float = 0.5
) -> tuple[np.ndarray, np.ndarray]:
    """Identity or horizontal flip, applied jointly to inputs and labels."""
    if rng.random() < flip_prob:
        return inputs[:, ::-1].copy(), labels[:, ::-1].copy()
    return inputs.copy(), labels.copy()


def strong_augment(
    inputs: np.ndarray,
    rng: np.random.Generator,
    noise_sigma: float,
    channel_jitter: float,
) -> np.ndarray:
    """Additive Gaussian noise plus random per-channel scaling."""
    out = inputs + noise_sigma * rng.standard_normal(inputs.shape)
    scale = 1.0 + channel_jitter * (2.0 * rng.random(inputs.shape[-1]) - 1.0)
    return out * scale
