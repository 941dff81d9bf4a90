"""Synthetic two-domain segmentation benchmark and the one-stage training
loop.

The scene generator lays out axis-aligned class rectangles over a background
class and draws per-pixel inputs from class-conditional Gaussians; the target
domain applies a fixed mean shift plus a covariance scaling to every class.
Target labels are carried for evaluation only and never reach the loop.

The model is a per-pixel MLP (no spatial mixing, so reverse-mode gradients
are exactly finite-difference checkable): a two-layer tanh encoder, an affine
softmax segmentation head, and a two-layer projection head whose output is
l2-normalized per pixel. A teacher copy is maintained by EMA and provides
pseudo labels, confidence weights, and the source features that feed the
class statistics and the centroid bank.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import selftrain
from .bank import CentroidBank
from .config import TrainConfig, config_dict, config_from_dict, config_hash
from .contrast import QuerySet, aggregate_cl, bank_loss, dist_loss, proto_loss, reg_loss
from .corenum import l2_normalize_rows, split_rng
from .errors import DimensionError
from .metrics import confusion, miou, pdd, pixel_accuracy
from .stats import IGNORE_LABEL, ClassStats, local_centroids, local_moments

CHECKPOINT_VERSION = 1

PARAM_NAMES = (
    "enc_w1", "enc_b1", "enc_w2", "enc_b2",
    "seg_w", "seg_b",
    "proj_w1", "proj_b1", "proj_w2", "proj_b2",
)


@dataclass
class SyntheticScene:
    inputs: np.ndarray  # (H, W, D)
    labels: np.ndarray  # (H, W), evaluation-only for target scenes
    domain: str  # "source" | "target"


class DomainSpec:
    """Class-conditional Gaussian layout shared by every scene of a benchmark.

    Built deterministically from the generator settings; the target domain is
    the source distribution under a fixed mean shift and std scaling.
    """

    def __init__(self, cfg: TrainConfig):
        if cfg.num_classes < 2 or cfg.input_dim < 2:
            raise ValueError("need at least 2 classes and 2 input dims")
        self.cfg = cfg
        rng = split_rng(cfg.data_seed, "domain-layout")
        directions = rng.standard_normal((cfg.num_classes, cfg.input_dim))
        directions, _ = l2_normalize_rows(directions)
        self.source_means = cfg.class_sep * directions
        self.source_stds = cfg.noise_scale * rng.uniform(
            0.6, 1.4, size=(cfg.num_classes, cfg.input_dim)
        )
        shift_dir, _ = l2_normalize_rows(rng.standard_normal((1, cfg.input_dim)))
        self.shift_vec = cfg.shift * shift_dir[0]
        self.target_means = self.source_means + self.shift_vec
        self.target_stds = self.source_stds * cfg.cov_scale

    def class_means(self, domain: str) -> np.ndarray:
        return self.source_means if domain == "source" else self.target_means

    def class_stds(self, domain: str) -> np.ndarray:
        return self.source_stds if domain == "source" else self.target_stds


def generate_scene(spec: DomainSpec, domain: str, rng: np.random.Generator) -> SyntheticScene:
    """One scene: rectangle layout for classes 1..K-1 over background class 0
    (the last class uses the small "rare" rectangle range), inputs drawn from
    the domain's class-conditional Gaussians."""
    cfg = spec.cfg
    if domain not in ("source", "target"):
        raise ValueError(f"unknown domain {domain!r}")
    h, w, k = cfg.height, cfg.width, cfg.num_classes
    labels = np.zeros((h, w), dtype=np.int64)
    for c in range(1, k):
        lo, hi = (cfg.rare_rect_min, cfg.rare_rect_max) if c == k - 1 else (cfg.rect_min, cfg.rect_max)
        for _ in range(cfg.rects_per_class):
            rh = int(rng.integers(lo, hi + 1))
            rw = int(rng.integers(lo, hi + 1))
            top = int(rng.integers(0, h - rh + 1))
            left = int(rng.integers(0, w - rw + 1))
            labels[top : top + rh, left : left + rw] = c
    means = spec.class_means(domain)
    stds = spec.class_stds(domain)
    noise = rng.standard_normal((h, w, cfg.input_dim))
    inputs = means[labels] + stds[labels] * noise
    return SyntheticScene(inputs, labels, domain)


def generate_pool(spec: DomainSpec, domain: str, count: int, rng: np.random.Generator):
    return [generate_scene(spec, domain, rng) for _ in range(count)]


class ModelParams:
    """Named parameter arrays for encoder, segmentation head, projection head."""

    def __init__(self, params: dict[str, np.ndarray]):
        if set(params) != set(PARAM_NAMES):
            raise DimensionError(f"parameter set mismatch: {sorted(params)}")
        self.params = {k: np.asarray(v, dtype=np.float64) for k, v in params.items()}

    @classmethod
    def init(cls, input_dim: int, hidden_dim: int, embed_dim: int, num_classes: int,
             rng: np.random.Generator) -> "ModelParams":
        def affine(fan_in, fan_out):
            bound = 1.0 / np.sqrt(fan_in)
            return rng.uniform(-bound, bound, size=(fan_in, fan_out)), np.zeros(fan_out)

        p = {}
        p["enc_w1"], p["enc_b1"] = affine(input_dim, hidden_dim)
        p["enc_w2"], p["enc_b2"] = affine(hidden_dim, hidden_dim)
        p["seg_w"], p["seg_b"] = affine(hidden_dim, num_classes)
        p["proj_w1"], p["proj_b1"] = affine(hidden_dim, hidden_dim)
        p["proj_w2"], p["proj_b2"] = affine(hidden_dim, embed_dim)
        return cls(p)

    def copy(self) -> "ModelParams":
        return ModelParams({k: v.copy() for k, v in self.params.items()})

    def zeros_like(self) -> dict[str, np.ndarray]:
        return {k: np.zeros_like(v) for k, v in self.params.items()}

    def __getitem__(self, key: str) -> np.ndarray:
        return self.params[key]


@dataclass
class ForwardCache:
    shape: tuple  # spatial shape of the grid
    x: np.ndarray
    h1: np.ndarray = None
    h2: np.ndarray = None
    probs: np.ndarray = None  # (H, W, K)
    g1: np.ndarray = None
    p2_raw: np.ndarray = None
    p2: np.ndarray = None  # softplus(p2_raw): positive pre-normalization embedding
    p2_norms: np.ndarray = None
    proj: np.ndarray = None  # (H, W, A)
    degenerate: np.ndarray = None


def forward(params: ModelParams, inputs: np.ndarray, head: str = "both") -> ForwardCache:
    """Per-pixel forward pass; head selects "seg", "proj", "both", or "enc"
    (encoder only)."""
    inputs = np.asarray(inputs, dtype=np.float64)
    if inputs.shape[-1] != params["enc_w1"].shape[0]:
        raise DimensionError(
            f"input dim {inputs.shape[-1]} vs model {params['enc_w1'].shape[0]}"
        )
    shape = inputs.shape[:-1]
    x = inputs.reshape(-1, inputs.shape[-1])
    h1 = np.tanh(x @ params["enc_w1"] + params["enc_b1"])
    h2 = np.tanh(h1 @ params["enc_w2"] + params["enc_b2"])
    cache = ForwardCache(shape=shape, x=x, h1=h1, h2=h2)
    if head in ("seg", "both"):
        logits = h2 @ params["seg_w"] + params["seg_b"]
        logits -= logits.max(axis=1, keepdims=True)
        e = np.exp(logits)
        cache.probs = (e / e.sum(axis=1, keepdims=True)).reshape(*shape, -1)
    if head in ("proj", "both"):
        g1 = np.tanh(h2 @ params["proj_w1"] + params["proj_b1"])
        p2_raw = g1 @ params["proj_w2"] + params["proj_b2"]
        # softplus keeps embeddings on the positive orthant (the full-scale
        # head is ReLU-terminated), so cross-class cosines stay positive and
        # the discrimination diagnostic operates away from its eps guard
        p2 = np.logaddexp(0.0, p2_raw)
        unit, degenerate = l2_normalize_rows(p2)
        cache.g1, cache.p2_raw, cache.p2 = g1, p2_raw, p2
        cache.p2_norms = np.linalg.norm(p2, axis=1)
        cache.proj = unit.reshape(*shape, -1)
        cache.degenerate = degenerate.reshape(shape)
    return cache


def backward(params: ModelParams, cache: ForwardCache,
             dlogits: np.ndarray | None = None,
             dproj: np.ndarray | None = None,
             dh2_extra: np.ndarray | None = None) -> dict[str, np.ndarray]:
    """Reverse-mode gradients for one forward pass given upstream gradients
    w.r.t. segmentation logits, the normalized projection output, and/or the
    encoder output directly (used when queries are taken pre-projection)."""
    grads = {k: np.zeros_like(v) for k, v in params.params.items()}
    dh2 = np.zeros_like(cache.h2)
    if dh2_extra is not None:
        dh2 += np.asarray(dh2_extra, dtype=np.float64).reshape(cache.h2.shape)
    if dlogits is not None:
        dl = np.asarray(dlogits, dtype=np.float64).reshape(cache.h2.shape[0], -1)
        grads["seg_w"] = cache.h2.T @ dl
        grads["seg_b"] = dl.sum(axis=0)
        dh2 += dl @ params["seg_w"].T
    if dproj is not None:
        dz = np.asarray(dproj, dtype=np.float64).reshape(cache.h2.shape[0], -1)
        proj = cache.proj.reshape(dz.shape)
        norms = cache.p2_norms
        ok = norms > 1e-12
        dp2 = dz.copy()  # degenerate rows pass through unchanged
        inner = np.einsum("na,na->n", dz[ok], proj[ok])
        dp2[ok] = (dz[ok] - proj[ok] * inner[:, None]) / norms[ok, None]
        dp2_raw = dp2 / (1.0 + np.exp(-cache.p2_raw))  # softplus'
        grads["proj_w2"] = cache.g1.T @ dp2_raw
        grads["proj_b2"] = dp2_raw.sum(axis=0)
        dg1 = dp2_raw @ params["proj_w2"].T
        dp1 = dg1 * (1.0 - cache.g1 ** 2)
        grads["proj_w1"] = cache.h2.T @ dp1
        grads["proj_b1"] = dp1.sum(axis=0)
        dh2 += dp1 @ params["proj_w1"].T
    dz2 = dh2 * (1.0 - cache.h2 ** 2)
    grads["enc_w2"] = cache.h1.T @ dz2
    grads["enc_b2"] = dz2.sum(axis=0)
    dh1 = dz2 @ params["enc_w2"].T
    dz1 = dh1 * (1.0 - cache.h1 ** 2)
    grads["enc_w1"] = cache.x.T @ dz1
    grads["enc_b1"] = dz1.sum(axis=0)
    return grads


@dataclass
class TrainState:
    student: ModelParams
    teacher: ModelParams
    stats: ClassStats
    bank: CentroidBank
    iteration: int = 0


@dataclass
class TrainResult:
    state: TrainState
    trace: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)


def _select_queries(proj: np.ndarray, labels: np.ndarray, degenerate: np.ndarray,
                    active: np.ndarray, limit: int, rng: np.random.Generator,
                    keep_mask: np.ndarray | None = None):
    """Flatten one image's projected features into (queries, labels), keeping
    labeled, non-degenerate pixels of classes with usable statistics."""
    flat = proj.reshape(-1, proj.shape[-1])
    lab = labels.reshape(-1)
    keep = (lab != IGNORE_LABEL) & ~degenerate.reshape(-1)
    keep &= active[np.clip(lab, 0, None)]
    if keep_mask is not None:
        keep &= keep_mask.reshape(-1)
    idx = np.nonzero(keep)[0]
    if limit and idx.size > limit:
        idx = np.sort(rng.choice(idx, size=limit, replace=False))
    return flat[idx], lab[idx], idx


def _unit_queries(cache: ForwardCache, where: str):
    """Unit-norm query grid plus its degenerate mask for the chosen feature
    space ("proj" = projection output, "encoder" = normalized h2)."""
    if where == "proj":
        return cache.proj, cache.degenerate, None, None
    unit, degen = l2_normalize_rows(cache.h2)
    norms = np.linalg.norm(cache.h2, axis=1)
    return unit.reshape(*cache.shape, -1), degen.reshape(cache.shape), unit, norms


def _through_normalization(dunit: np.ndarray, unit: np.ndarray, norms: np.ndarray) -> np.ndarray:
    """Chain a gradient w.r.t. a row-normalized output back to the raw rows;
    degenerate rows pass through unchanged."""
    out = dunit.copy()
    ok = norms > 1e-12
    inner = np.einsum("na,na->n", dunit[ok], unit[ok])
    out[ok] = (dunit[ok] - unit[ok] * inner[:, None]) / norms[ok, None]
    return out


def composite_losses(cfg: TrainConfig, state: TrainState,
                     src_cache: ForwardCache, src_labels: np.ndarray,
                     tgt_cache: ForwardCache, tgt_pseudo: np.ndarray, conf_w: float,
                     contrast_active: bool, rng: np.random.Generator):
    """Assemble the composite objective and its gradients w.r.t. the student's
    segmentation logits and query features on both images.

    Returns (terms, (dlogits_src, dproj_src, dh2_src), (dlogits_tgt, dproj_tgt, dh2_tgt)).
    """
    ce = selftrain.source_ce(src_cache.probs, src_labels)
    ssl = selftrain.target_ssl(tgt_cache.probs, tgt_pseudo, conf_w)
    terms = {"ce": ce.value, "ssl": ssl.value, "cl": 0.0, "reg": 0.0}
    dquery_src = dquery_tgt = None
    src_view = tgt_view = None

    if contrast_active and (cfg.lambda_cl != 0.0 or cfg.lambda_reg != 0.0):
        src_view = _unit_queries(src_cache, cfg.stats_features)
        tgt_view = _unit_queries(tgt_cache, cfg.stats_features)
        dquery_src = np.zeros_like(src_view[0])
        dquery_tgt = np.zeros_like(tgt_view[0])
        prototypes, initialized = state.stats.prototypes()
        if cfg.lambda_cl != 0.0:
            if cfg.variant == "bank":
                sizes = state.bank.sizes()
                usable = (sizes > 0) & (np.count_nonzero(sizes > 0) >= 2)
            else:
                usable = initialized & (np.count_nonzero(initialized) >= 2)
            qs, ls, is_ = _select_queries(
                src_view[0], src_labels, src_view[1], usable, cfg.query_limit, rng)
            tgt_keep = None
            if cfg.query_conf_filter:
                tgt_keep = tgt_cache.probs.reshape(-1, cfg.num_classes).max(axis=1) > cfg.alpha
            qt, lt, it = _select_queries(
                tgt_view[0], tgt_pseudo, tgt_view[1], usable, cfg.query_limit, rng,
                keep_mask=tgt_keep)
            pooled = np.concatenate([qs, qt])
            pooled_labels = np.concatenate([ls, lt])
            if pooled.shape[0] > 0:
                queries = QuerySet(pooled, pooled_labels, validate=False)
                if cfg.variant == "proto":
                    lv = proto_loss(queries, prototypes, cfg.tau, initialized)
                elif cfg.variant == "bank":
                    lv = bank_loss(queries, state.bank, cfg.tau)
                else:
                    lv = dist_loss(queries, state.stats, cfg.tau)
                terms["cl"] = lv.value
                n_src = qs.shape[0]
                dquery_src.reshape(-1, dquery_src.shape[-1])[is_] += cfg.lambda_cl * lv.grads[:n_src]
                dquery_tgt.reshape(-1, dquery_tgt.shape[-1])[it] += cfg.lambda_cl * lv.grads[n_src:]
        if cfg.lambda_reg != 0.0 and np.count_nonzero(initialized) >= 2:
            reg_vals = []
            for view, dquery in ((src_view, dquery_src), (tgt_view, dquery_tgt)):
                flat = view[0].reshape(-1, view[0].shape[-1])
                rv = reg_loss(flat.mean(axis=0), prototypes, cfg.tau, initialized)
                reg_vals.append(rv.value)
                # both images average into the reg term, and the image mean
                # spreads the gradient uniformly over pixels
                coeff = cfg.reg_sign * cfg.lambda_reg / (2.0 * flat.shape[0])
                dquery += (coeff * rv.grads[0]).reshape((1, 1, -1))
            terms["reg"] = float(np.mean(reg_vals))

    terms["total"] = (
        terms["ce"] + terms["ssl"] + cfg.lambda_cl * terms["cl"]
        + cfg.reg_sign * cfg.lambda_reg * terms["reg"]
    )

    def route(view, dquery):
        if dquery is None:
            return None, None
        if cfg.stats_features == "proj":
            return dquery, None
        flat = dquery.reshape(-1, dquery.shape[-1])
        return None, _through_normalization(flat, view[2], view[3])

    dproj_s, dh2_s = route(src_view, dquery_src)
    dproj_t, dh2_t = route(tgt_view, dquery_tgt)
    return terms, (ce.grads, dproj_s, dh2_s), (ssl.grads, dproj_t, dh2_t)


def evaluate_model(params: ModelParams, scenes, stats: ClassStats, num_classes: int,
                   stats_features: str = "proj") -> dict:
    """Target-side evaluation: pooled confusion matrix (mIoU, accuracy) and
    PDD of the query-space features against the current prototypes."""
    cm = np.zeros((num_classes, num_classes), dtype=np.int64)
    feats, labs = [], []
    for scene in scenes:
        cache = forward(params, scene.inputs, head="both")
        pred = selftrain.pseudo_labels(cache.probs)
        cm += confusion(pred, scene.labels, num_classes)
        if stats_features == "proj":
            feats.append(cache.proj.reshape(-1, cache.proj.shape[-1]))
        else:
            unit, _ = l2_normalize_rows(cache.h2)
            feats.append(unit)
        labs.append(scene.labels.reshape(-1))
    iou, mean_iou = miou(cm)
    prototypes, initialized = stats.prototypes()
    lab = np.concatenate(labs)
    keep = initialized[np.clip(lab, 0, None)] & (lab != IGNORE_LABEL)
    report = pdd(np.concatenate(feats)[keep], lab[keep], prototypes)
    return {
        "miou": mean_iou,
        "per_class_iou": [None if np.isnan(v) else float(v) for v in iou],
        "accuracy": pixel_accuracy(cm),
        "pdd": {str(k): v for k, v in sorted(report.values.items())},
        "pdd_mean": report.mean(),
    }


def train(cfg: TrainConfig, source_scenes, target_scenes, eval_scenes,
          iteration_callback=None) -> TrainResult:
    """One-stage training: self-training from iteration 0, statistics/bank
    updates from teacher source features every iteration, contrastive and
    regularization terms once the warm-up gate opens, EMA teacher update
    last. Deterministic given (config, seed)."""
    cfg.validate()
    dim = cfg.embed_dim if cfg.stats_features == "proj" else cfg.hidden_dim
    init_rng = split_rng(cfg.seed, "model-init")
    student = ModelParams.init(cfg.input_dim, cfg.hidden_dim, cfg.embed_dim,
                               cfg.num_classes, init_rng)
    state = TrainState(
        student=student,
        teacher=student.copy(),
        stats=ClassStats(cfg.num_classes, dim),
        bank=CentroidBank(cfg.num_classes, dim, cfg.bank_size),
    )
    loop_rng = split_rng(cfg.seed, "train-loop")
    source_counts = np.stack([
        np.bincount(s.labels[s.labels != IGNORE_LABEL], minlength=cfg.num_classes)
        for s in source_scenes
    ])
    crop_trials = cfg.crop_trials if cfg.use_cbc else 1
    trace = []

    for t in range(cfg.max_iters):
        # sample one source and one target scene
        if cfg.use_rare_sampling:
            si = selftrain.rare_class_sample(source_counts, cfg.rare_temperature, loop_rng)
        else:
            si = int(loop_rng.integers(0, len(source_scenes)))
        ti = int(loop_rng.integers(0, len(target_scenes)))
        src, tgt = source_scenes[si], target_scenes[ti]

        # weak views; the teacher works on these
        src_in, src_lab = selftrain.weak_augment(src.inputs, src.labels, loop_rng, cfg.flip_prob)
        tgt_in, _ = selftrain.weak_augment(tgt.inputs, tgt.labels, loop_rng, cfg.flip_prob)

        # pseudo labels on the full target view, then class-balanced crops
        teacher_tgt = forward(state.teacher, tgt_in, head="seg")
        tgt_pl_full = selftrain.pseudo_labels(teacher_tgt.probs)
        src_box = selftrain.class_balanced_crop(
            src_lab, cfg.crop_height, cfg.crop_width, cfg.cat_max_ratio, crop_trials, loop_rng)
        tgt_box = selftrain.class_balanced_crop(
            tgt_pl_full, cfg.crop_height, cfg.crop_width, cfg.cat_max_ratio, crop_trials, loop_rng)
        src_in, src_lab = src_box.apply(src_in), src_box.apply(src_lab)
        tgt_in = tgt_box.apply(tgt_in)
        tgt_pseudo = tgt_box.apply(tgt_pl_full)
        tgt_probs_crop = tgt_box.apply(teacher_tgt.probs)
        conf_w = selftrain.confidence_weight(tgt_probs_crop, cfg.alpha)

        # teacher source features feed the statistics / bank
        if cfg.stats_features == "proj":
            teacher_src = forward(state.teacher, src_in, head="proj")
            feat = teacher_src.proj
        else:
            teacher_src = forward(state.teacher, src_in, head="enc")
            feat, _ = l2_normalize_rows(teacher_src.h2)
            feat = feat.reshape(*teacher_src.shape, -1)
        if cfg.variant == "dist":
            state.stats.update_batch(feat, src_lab, with_cov=True)
        else:
            state.stats.update_batch(feat, src_lab, with_cov=False)
        if cfg.variant == "bank":
            for k, (centroid, _m) in local_centroids(feat, src_lab).items():
                state.bank.enqueue(k, centroid)

        # student forward on both crops (strong view on target)
        tgt_student_in = selftrain.strong_augment(
            tgt_in, loop_rng, cfg.noise_sigma, cfg.channel_jitter)
        contrast_active = t > cfg.warmup_iters
        needs_proj = contrast_active and (cfg.lambda_cl != 0.0 or cfg.lambda_reg != 0.0) \
            and cfg.stats_features == "proj"
        student_head = "both" if needs_proj else "seg"
        src_cache = forward(state.student, src_in, head=student_head)
        tgt_cache = forward(state.student, tgt_student_in, head=student_head)

        terms, (dlog_s, dproj_s, dh2_s), (dlog_t, dproj_t, dh2_t) = composite_losses(
            cfg, state, src_cache, src_lab, tgt_cache, tgt_pseudo, conf_w,
            contrast_active, loop_rng)

        grads = backward(state.student, src_cache, dlog_s, dproj_s, dh2_s)
        tgrads = backward(state.student, tgt_cache, dlog_t, dproj_t, dh2_t)
        for name in PARAM_NAMES:
            state.student.params[name] -= cfg.learning_rate * (grads[name] + tgrads[name])
        selftrain.ema_update(state.teacher.params, state.student.params, cfg.beta)
        state.iteration = t + 1

        entry = {
            "iteration": t,
            "loss_ce": terms["ce"],
            "loss_ssl": terms["ssl"],
            "loss_cl": terms["cl"],
            "loss_reg": terms["reg"],
            "loss_total": terms["total"],
            "conf_weight": conf_w,
        }
        if (t + 1) % cfg.eval_every == 0 or t + 1 == cfg.max_iters:
            entry["eval"] = evaluate_model(state.student, eval_scenes, state.stats,
                                           cfg.num_classes, cfg.stats_features)
        trace.append(entry)
        if iteration_callback is not None:
            iteration_callback(t, state, terms)

    final_eval = evaluate_model(state.student, eval_scenes, state.stats, cfg.num_classes,
                                cfg.stats_features)
    summary = {
        "config_hash": config_hash(cfg),
        "seed": cfg.seed,
        "iterations": cfg.max_iters,
        "variant": cfg.variant,
        "final": final_eval,
        "loss_curves": {
            key: [e[key] for e in trace]
            for key in ("loss_ce", "loss_ssl", "loss_cl", "loss_reg", "loss_total")
        },
    }
    return TrainResult(state=state, trace=trace, summary=summary)


def build_benchmark(cfg: TrainConfig):
    """Deterministic scene pools for a config: the data_seed fixes the domain
    layout and every scene; the run seed only drives init and the loop."""
    spec = DomainSpec(cfg)
    src = generate_pool(spec, "source", cfg.n_source, split_rng(cfg.data_seed, "scenes-source"))
    tgt = generate_pool(spec, "target", cfg.n_target, split_rng(cfg.data_seed, "scenes-target"))
    ev = generate_pool(spec, "target", cfg.n_eval, split_rng(cfg.data_seed, "scenes-eval"))
    return spec, src, tgt, ev


def run_training(cfg: TrainConfig, iteration_callback=None) -> TrainResult:
    _, src, tgt, ev = build_benchmark(cfg)
    return train(cfg, src, tgt, ev, iteration_callback=iteration_callback)


def save_checkpoint(path, cfg: TrainConfig, state: TrainState) -> None:
    payload = {
        "version": CHECKPOINT_VERSION,
        "config": config_dict(cfg),
        "iteration": state.iteration,
        "student": {k: v.tolist() for k, v in state.student.params.items()},
        "teacher": {k: v.tolist() for k, v in state.teacher.params.items()},
        "stats": state.stats.to_json(),
        "bank": state.bank.to_json(),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True)


def load_checkpoint(path):
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {payload.get('version')}")
    cfg = config_from_dict(payload["config"])
    student = ModelParams({k: np.asarray(v) for k, v in payload["student"].items()})
    teacher = ModelParams({k: np.asarray(v) for k, v in payload["teacher"].items()})
    state = TrainState(
        student=student,
        teacher=teacher,
        stats=ClassStats.from_json(payload["stats"]),
        bank=CentroidBank.from_json(payload["bank"]),
        iteration=payload["iteration"],
    )
    return cfg, state
