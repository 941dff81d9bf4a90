"""Batch experiment runner.

Verbs:
  train <config>                 run the training loop, write trace/checkpoint/summary
  verify <suite>                 run a property suite (bound | grads | stats | all)
  compare <config>... --seeds    multi-seed comparison table (CSV + JSON)
  export-embeddings <checkpoint> dump evaluation-scene embeddings to CSV

Exit codes: 0 success, 1 property/acceptance failure, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import metrics, toymodel, verify
from .config import config_dict, config_hash, load_config, parse_overrides
from .errors import ConfigError


def _json_dump(payload, path: Path) -> None:
    path.write_text(json.dumps(payload, sort_keys=True, indent=1) + "\n", encoding="utf-8")


def _out_dir(args, cfg=None) -> Path:
    out = args.out or (cfg.out if cfg is not None and cfg.out else "runs")
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _load(args):
    overrides = parse_overrides(args.override or [])
    if args.seed is not None:
        overrides["seed"] = args.seed
    return load_config(args.config, overrides)


def cmd_train(args) -> int:
    cfg = _load(args)
    out = _out_dir(args, cfg)
    result = toymodel.run_training(cfg)
    with open(out / "metrics.jsonl", "w", encoding="utf-8") as fh:
        for entry in result.trace:
            fh.write(json.dumps(entry, sort_keys=True) + "\n")
    toymodel.save_checkpoint(out / "checkpoint.json", cfg, result.state)
    summary = dict(result.summary)
    summary["config"] = config_dict(cfg)
    _json_dump(summary, out / "summary.json")
    final = result.summary["final"]
    print(f"train: variant={cfg.variant} seed={cfg.seed} "
          f"miou={final['miou']:.4f} acc={final['accuracy']:.4f} "
          f"pdd_mean={final['pdd_mean']:.4f}")
    print(f"artifacts in {out}")
    return 0


def cmd_verify(args) -> int:
    names = ["bound", "grads", "stats"] if args.suite == "all" else [args.suite]
    report = verify.run_suites(names, seed=args.seed)
    out = _out_dir(args)
    _json_dump(report, out / f"verify_{args.suite}.json")
    for suite in report["suites"]:
        flag = "PASS" if suite["passed"] else "FAIL"
        print(f"[{flag}] suite={suite['suite']} runtime={suite['runtime_sec']:.1f}s")
        for prop in suite["properties"]:
            detail = {k: v for k, v in prop.items() if k not in ("name", "failures")}
            print(f"    {prop['name']}: {detail}")
    return 0 if report["passed"] else 1


def cmd_compare(args) -> int:
    seeds = [int(s) for s in args.seeds.split(",") if s != ""]
    if not seeds:
        raise ConfigError("--seeds must list at least one seed")
    overrides = parse_overrides(args.override or [])
    rows = []
    table = []
    base_dims = None
    for config_path in args.configs:
        label = Path(config_path).stem
        per_seed = []
        for seed in seeds:
            cfg = load_config(config_path, {**overrides, "seed": seed})
            dims = (cfg.height, cfg.width, cfg.num_classes, cfg.input_dim, cfg.data_seed)
            if base_dims is None:
                base_dims = dims
            elif dims != base_dims:
                raise ConfigError(
                    f"{config_path}: benchmark dims {dims} differ from {base_dims}; "
                    "compared configs must share the benchmark")
            result = toymodel.run_training(cfg)
            final = result.summary["final"]
            record = {
                "config": label, "seed": seed,
                "accuracy": final["accuracy"], "miou": final["miou"],
                "pdd_mean": final["pdd_mean"], "pdd": final["pdd"],
                "config_hash": result.summary["config_hash"],
            }
            per_seed.append(record)
            rows.append(record)
            print(f"compare: {label} seed={seed} acc={final['accuracy']:.4f} "
                  f"miou={final['miou']:.4f} pdd={final['pdd_mean']:.4f}")
        table.append({
            "config": label,
            "mean_accuracy": float(np.mean([r["accuracy"] for r in per_seed])),
            "mean_miou": float(np.mean([r["miou"] for r in per_seed])),
            "mean_pdd": float(np.mean([r["pdd_mean"] for r in per_seed])),
            "seeds": seeds,
        })
    out = _out_dir(args)
    _json_dump({"rows": rows, "means": table}, out / "compare.json")
    with open(out / "compare.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(
            fh, fieldnames=["config", "seed", "accuracy", "miou", "pdd_mean"])
        writer.writeheader()
        for r in rows:
            writer.writerow({k: r[k] for k in writer.fieldnames})
    for t in table:
        print(f"mean: {t['config']} acc={t['mean_accuracy']:.4f} "
              f"miou={t['mean_miou']:.4f} pdd={t['mean_pdd']:.4f}")
    return 0


def cmd_export(args) -> int:
    cfg, state = toymodel.load_checkpoint(args.checkpoint)
    out = _out_dir(args)
    _, _, _, eval_scenes = toymodel.build_benchmark(cfg)
    feats, labs = [], []
    for scene in eval_scenes:
        cache = toymodel.forward(state.student, scene.inputs, head="proj")
        feats.append(cache.proj.reshape(-1, cfg.embed_dim))
        labs.append(scene.labels.reshape(-1))
    path = metrics.export_embeddings(
        np.concatenate(feats), np.concatenate(labs), out / "embeddings.csv")
    print(f"wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pixelcontrast", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, with_seed=True):
        p.add_argument("--out", default=None, help="output directory (default: runs/)")
        if with_seed:
            p.add_argument("--seed", type=int, default=None)

    p_train = sub.add_parser("train", help="run one training experiment")
    p_train.add_argument("config")
    p_train.add_argument("--override", action="append", metavar="KEY=VALUE")
    common(p_train)
    p_train.set_defaults(func=cmd_train)

    p_verify = sub.add_parser("verify", help="run a property suite")
    p_verify.add_argument("suite", choices=["bound", "grads", "stats", "all"])
    common(p_verify)
    p_verify.set_defaults(func=cmd_verify)

    p_cmp = sub.add_parser("compare", help="multi-seed comparison of configs")
    p_cmp.add_argument("configs", nargs="+")
    p_cmp.add_argument("--seeds", required=True, help="comma list, e.g. 0,1,2,3,4")
    p_cmp.add_argument("--override", action="append", metavar="KEY=VALUE")
    common(p_cmp, with_seed=False)
    p_cmp.set_defaults(func=cmd_compare)

    p_exp = sub.add_parser("export-embeddings", help="dump eval-scene embeddings")
    p_exp.add_argument("checkpoint")
    common(p_exp, with_seed=False)
    p_exp.set_defaults(func=cmd_export)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
