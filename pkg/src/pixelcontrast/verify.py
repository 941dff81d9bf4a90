"""Property suites: the Jensen-bound certificate, finite-difference gradient
checks for every loss and the full composite, and streaming-statistics
exactness against pooled oracles. The CLI `verify` verb runs these; the
acceptance tests assert on the same results."""

from __future__ import annotations

import time

import numpy as np

from . import selftrain, toymodel
from .bank import CentroidBank
from .config import TrainConfig
from .contrast import QuerySet, bank_loss, dist_loss, mc_infinite_loss, proto_loss, reg_loss
from .corenum import l2_normalize_rows, split_rng
from .stats import ClassStats, local_centroids


def random_psd(dim: int, max_trace: float, rng: np.random.Generator) -> np.ndarray:
    g = rng.standard_normal((dim, dim))
    s = g @ g.T
    target = rng.uniform(0.05, max_trace)
    return s * (target / np.trace(s))


def random_stats(dim: int, num_classes: int, rng: np.random.Generator,
                 max_trace: float = 4.0) -> ClassStats:
    stats = ClassStats(num_classes, dim)
    for k in range(num_classes):
        direction, _ = l2_normalize_rows(rng.standard_normal((1, dim)))
        stats.mean[k] = rng.uniform(0.3, 1.0) * direction[0]
        stats.cov[k] = random_psd(dim, max_trace, rng)
        stats.count[k] = 100
    return stats


def bound_suite(n_instances: int = 200, samples: int = 10_000, seed: int = 2024,
                n_bootstrap: int = 100) -> dict:
    """Monte-Carlo estimates of the infinite-pair loss must sit below the
    closed-form bound plus 3 bootstrap stderr, per instance."""
    rng = split_rng(seed, "verify-bound")
    taus = (0.1, 0.5, 1.0)
    failures = []
    min_slack = np.inf
    start = time.perf_counter()
    for i in range(n_instances):
        dim = int(rng.integers(2, 9))
        k = int(rng.integers(2, 6))
        tau = taus[i % len(taus)]
        stats = random_stats(dim, k, rng)
        query, _ = l2_normalize_rows(rng.standard_normal((1, dim)))
        query = query[0]
        label = int(rng.integers(0, k))
        bound = dist_loss(QuerySet(query[None, :], [label]), stats, tau).value
        est, stderr = mc_infinite_loss(query, label, stats, tau, samples, rng,
                                       n_bootstrap=n_bootstrap)
        ok = est <= bound + 3.0 * stderr
        slack = (bound + 3.0 * stderr - est) / stderr if stderr > 0 else np.inf
        min_slack = min(min_slack, slack)
        if not ok:
            failures.append({"instance": i, "estimate": est, "bound": bound, "stderr": stderr})
    runtime = time.perf_counter() - start
    return {
        "suite": "bound",
        "passed": not failures,
        "properties": [{
            "name": "mc_estimate <= dist_loss + 3*stderr",
            "trials": n_instances,
            "failures": failures,
            "min_slack_stderr_units": None if np.isinf(min_slack) else float(min_slack),
        }],
        "runtime_sec": runtime,
    }


def fd_gradient(fn, x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central finite differences of a scalar function over a flat array."""
    g = np.zeros_like(x)
    flat = x.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        up = fn()
        flat[i] = orig - h
        down = fn()
        flat[i] = orig
        g.reshape(-1)[i] = (up - down) / (2.0 * h)
    return g


def rel_err(a: np.ndarray, b: np.ndarray) -> float:
    denom = max(float(np.linalg.norm(a)), float(np.linalg.norm(b)), 1e-12)
    return float(np.linalg.norm(a - b)) / denom


def _loss_grad_cases(seed: int, trials: int):
    """Random (name, loss closure, analytic grad) cases for every objective."""
    rng = split_rng(seed, "verify-grads")
    for trial in range(trials):
        dim = int(rng.integers(2, 7))
        k = int(rng.integers(2, 5))
        tau = float(rng.choice([0.1, 0.5, 1.0]))
        stats = random_stats(dim, k, rng, max_trace=2.0)
        n_q = int(rng.integers(1, 5))
        queries, _ = l2_normalize_rows(rng.standard_normal((n_q, dim)))
        labels = rng.integers(0, k, size=n_q)
        bank = CentroidBank(k, dim, capacity=6)
        for c in range(k):
            for _ in range(int(rng.integers(1, 5))):
                bank.enqueue(c, rng.uniform(-1, 1, dim) * 0.8)

        def qset(arr):
            return QuerySet(arr, labels, validate=False)

        yield (f"proto[{trial}]", queries,
               lambda q=queries: proto_loss(qset(q), stats.mean, tau, stats.initialized),
               )
        yield (f"dist[{trial}]", queries,
               lambda q=queries: dist_loss(qset(q), stats, tau))
        yield (f"bank[{trial}]", queries,
               lambda q=queries: bank_loss(qset(q), bank, tau))
        q_mean = rng.uniform(-0.5, 0.5, dim)
        yield (f"reg[{trial}]", q_mean,
               lambda q=q_mean: reg_loss(q, stats.mean, tau, stats.initialized))


def grads_suite(seed: int = 77, trials: int = 50, h: float = 1e-5) -> dict:
    """Analytic gradients vs central finite differences: per-loss checks and
    the full composite objective on a small two-domain scene."""
    start = time.perf_counter()
    worst = {"proto": 0.0, "dist": 0.0, "bank": 0.0, "reg": 0.0}
    for name, x, make in _loss_grad_cases(seed, trials):
        lv = make()
        fd = fd_gradient(lambda: make().value, x, h)
        err = rel_err(lv.grads.reshape(fd.shape), fd)
        key = name.split("[")[0]
        worst[key] = max(worst[key], err)

    # cross-entropy losses, gradient w.r.t. logits
    rng = split_rng(seed, "verify-grads-ce")
    worst_ce = 0.0
    for _ in range(trials):
        h_, w_, k = 3, 4, int(rng.integers(2, 5))
        logits = rng.standard_normal((h_, w_, k))
        labels = rng.integers(0, k, size=(h_, w_))
        labels[rng.random((h_, w_)) < 0.2] = -1
        w_conf = float(rng.uniform(0.2, 1.0))

        def ce_val():
            e = np.exp(logits - logits.max(axis=-1, keepdims=True))
            probs = e / e.sum(axis=-1, keepdims=True)
            return selftrain.target_ssl(probs, labels, w_conf).value

        e = np.exp(logits - logits.max(axis=-1, keepdims=True))
        probs = e / e.sum(axis=-1, keepdims=True)
        analytic = selftrain.target_ssl(probs, labels, w_conf).grads
        fd = fd_gradient(ce_val, logits, h)
        worst_ce = max(worst_ce, rel_err(analytic, fd))

    composite = composite_gradient_check(seed=seed, h=h)
    runtime = time.perf_counter() - start
    max_loss_err = max(max(worst.values()), worst_ce)
    passed = max_loss_err < 1e-6 and composite["max_rel_err"] < 1e-5
    return {
        "suite": "grads",
        "passed": bool(passed),
        "properties": [
            {"name": "loss gradients vs central differences", "trials": trials,
             "max_rel_err": max_loss_err, "per_loss": {**worst, "cross_entropy": worst_ce},
             "tolerance": 1e-6},
            {"name": "composite objective gradient (6x6 scene, all variants)",
             "max_rel_err": composite["max_rel_err"], "per_variant": composite["per_variant"],
             "tolerance": 1e-5},
        ],
        "runtime_sec": runtime,
    }


def _fd_config() -> TrainConfig:
    return TrainConfig(
        height=6, width=6, num_classes=3, input_dim=4, hidden_dim=12, embed_dim=6,
        crop_height=6, crop_width=6, rect_min=2, rect_max=4, rare_rect_min=2,
        rare_rect_max=3, query_limit=0, n_source=2, n_target=2, n_eval=1,
        warmup_iters=0, max_iters=1,
    )


def composite_gradient_check(seed: int = 77, h: float = 1e-5) -> dict:
    """Finite-difference check of the full objective's parameter gradients on
    a 6x6 scene, for each contrast variant. Teacher-side state (pseudo labels,
    confidence weight, statistics, bank) is frozen; the check differentiates
    through the student only, which is exactly what training does."""
    cfg = _fd_config()
    rng = split_rng(seed, "verify-composite")
    spec = toymodel.DomainSpec(cfg)
    src = toymodel.generate_scene(spec, "source", rng)
    tgt = toymodel.generate_scene(spec, "target", rng)
    student = toymodel.ModelParams.init(cfg.input_dim, cfg.hidden_dim, cfg.embed_dim,
                                        cfg.num_classes, rng)
    teacher = toymodel.ModelParams.init(cfg.input_dim, cfg.hidden_dim, cfg.embed_dim,
                                        cfg.num_classes, rng)
    teacher_tgt = toymodel.forward(teacher, tgt.inputs, head="seg")
    pseudo = selftrain.pseudo_labels(teacher_tgt.probs)
    conf_w = selftrain.confidence_weight(teacher_tgt.probs, cfg.alpha)
    teacher_src = toymodel.forward(teacher, src.inputs, head="proj")
    stats = ClassStats(cfg.num_classes, cfg.embed_dim)
    stats.update_batch(teacher_src.proj, src.labels, with_cov=True)
    bank = CentroidBank(cfg.num_classes, cfg.embed_dim, cfg.bank_size)
    for k, (centroid, _) in local_centroids(teacher_src.proj, src.labels).items():
        bank.enqueue(k, centroid)

    per_variant = {}
    for variant in ("proto", "bank", "dist"):
        cfg.variant = variant
        state = toymodel.TrainState(student=student, teacher=teacher, stats=stats, bank=bank)
        fixed_rng = split_rng(seed, "unused")  # query_limit=0: no draws

        def total_loss() -> float:
            src_cache = toymodel.forward(student, src.inputs, head="both")
            tgt_cache = toymodel.forward(student, tgt.inputs, head="both")
            terms, _, _ = toymodel.composite_losses(
                cfg, state, src_cache, src.labels, tgt_cache, pseudo, conf_w,
                True, fixed_rng)
            return terms["total"]

        src_cache = toymodel.forward(student, src.inputs, head="both")
        tgt_cache = toymodel.forward(student, tgt.inputs, head="both")
        _, (dls, dps, dhs), (dlt, dpt, dht) = toymodel.composite_losses(
            cfg, state, src_cache, src.labels, tgt_cache, pseudo, conf_w, True, fixed_rng)
        analytic = toymodel.backward(student, src_cache, dls, dps, dhs)
        for name, g in toymodel.backward(student, tgt_cache, dlt, dpt, dht).items():
            analytic[name] += g

        worst = 0.0
        for name in toymodel.PARAM_NAMES:
            fd = fd_gradient(total_loss, student.params[name], h)
            worst = max(worst, rel_err(analytic[name], fd))
        per_variant[variant] = worst
    return {"max_rel_err": max(per_variant.values()), "per_variant": per_variant}


def stats_suite(seed: int = 55, n_streams: int = 50, stream_len: int = 200) -> dict:
    """Streaming mean/covariance over random batch partitions must reproduce
    the one-shot pooled statistics; includes the 1-D {0,2}+{4} exact case."""
    rng = split_rng(seed, "verify-stats")
    start = time.perf_counter()
    worst = 0.0
    for _ in range(n_streams):
        dim = int(rng.integers(2, 7))
        pixels = rng.standard_normal((stream_len, dim)) * rng.uniform(0.3, 2.0)
        stats = ClassStats(1, dim)
        pos = 0
        while pos < stream_len:
            m = int(rng.integers(1, 40))
            batch = pixels[pos : pos + m]
            pos += batch.shape[0]
            mu = batch.mean(axis=0)
            d = batch - mu
            stats.update_cov(0, mu, d.T @ d / batch.shape[0], batch.shape[0])
        pooled_mu = pixels.mean(axis=0)
        dd = pixels - pooled_mu
        pooled_cov = dd.T @ dd / stream_len
        worst = max(worst, rel_err(stats.mean[0], pooled_mu), rel_err(stats.cov[0], pooled_cov))

    exact = ClassStats(1, 1)
    exact.update_cov(0, np.array([1.0]), np.array([[1.0]]), 2)
    exact.update_cov(0, np.array([4.0]), np.array([[0.0]]), 1)
    exact_ok = exact.cov[0, 0, 0] == 8.0 / 3.0 and exact.mean[0, 0] == 2.0
    runtime = time.perf_counter() - start
    return {
        "suite": "stats",
        "passed": bool(worst < 1e-10 and exact_ok),
        "properties": [
            {"name": "stream-split invariance vs pooled oracle", "trials": n_streams,
             "max_rel_err": worst, "tolerance": 1e-10},
            {"name": "1-D {0,2}+{4} case gives cov 8/3 exactly", "passed": bool(exact_ok),
             "value": float(exact.cov[0, 0, 0])},
        ],
        "runtime_sec": runtime,
    }


SUITES = {"bound": bound_suite, "grads": grads_suite, "stats": stats_suite}


def run_suites(names, seed: int | None = None) -> dict:
    reports = []
    for name in names:
        kwargs = {} if seed is None else {"seed": seed}
        reports.append(SUITES[name](**kwargs))
    return {"passed": all(r["passed"] for r in reports), "suites": reports}
