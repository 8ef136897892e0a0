"""Command-line entry point: ``divaug {train,augment,measure,select-demo}``.

Exit status is 0 on success, 2 for usage or configuration errors and 1 for
runtime failures.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import rng as rngs
from .data import load_dataset, write_image
from .metrics import affinity, dataset_loss_diversity, dataset_variance_diversity
from .oracle import load_checkpoint
from .pipeline import AUGMENT_KINDS, ConfigError, RunConfig, load_config, train_with_divaug
from .selection import brute_force_max_variance, kmeanspp_select, random_select
from .strategies import STRATEGIES, Augmenter, make_candidates

log = logging.getLogger("divaug")

_TRAIN_FLAGS = {
    "dataset": str, "E": int, "S": int, "epochs": int, "batch_size": int, "lr": float,
    "weight_decay": float, "strategy": str, "workers": int, "model": str, "hidden": int,
    "eval_dataset": str, "augment_kind": str,
}


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=None, help="master random seed")
    p.add_argument("--config", default=None, help="flat key = value config file")
    p.add_argument("--output-dir", default=None, help="directory for outputs")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="divaug", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train the oracle with a DivAug-style strategy")
    _common(p)
    for name, typ in _TRAIN_FLAGS.items():
        flag = "--" + name.replace("_", "-")
        p.add_argument(flag, dest=name, type=typ, default=None)

    p = sub.add_parser("augment", help="write E augmented variants per input image")
    _common(p)
    p.add_argument("--input", required=True, help="dataset spec (synthetic:..., cifar10:FILE, dir:PATH)")
    p.add_argument("--E", type=int, default=8)
    p.add_argument("--augment-kind", default="auto", choices=AUGMENT_KINDS)
    p.add_argument("--limit", type=int, default=None, help="only the first N images")

    p = sub.add_parser("measure", help="diversity / affinity / loss diversity of a strategy")
    _common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--strategy", required=True, choices=STRATEGIES)
    p.add_argument("--k", type=int, default=4)
    p.add_argument("--E", type=int, default=8)
    p.add_argument("--augment-kind", default="auto", choices=AUGMENT_KINDS)
    p.add_argument("--metric", default="all", choices=("all", "variance", "affinity", "loss"))

    p = sub.add_parser("select-demo", help="compare selections on probability vectors from a CSV")
    _common(p)
    p.add_argument("--csv", required=True, help="one probability vector per row")
    p.add_argument("--S", type=int, required=True)
    return parser


def _augment_kind(name: str, data) -> str | None:
    if name == "none":
        return None
    if name == "auto":
        return data.kind
    return name


def cmd_train(args) -> int:
    overrides = {k: getattr(args, k) for k in _TRAIN_FLAGS}
    overrides["seed"] = args.seed
    overrides["output_dir"] = args.output_dir
    config = load_config(args.config, overrides)
    if not config.output_dir:
        raise ConfigError("an output directory is required (--output-dir or output_dir)")
    result = train_with_divaug(config)
    final = {r.metric: r.value for r in result.records if r.metric.endswith("accuracy")}
    print(json.dumps({"output_dir": config.output_dir, "steps": len(result.counters.train_per_step),
                      **final}, sort_keys=True))
    return 0


def cmd_augment(args) -> int:
    if args.output_dir is None:
        raise ConfigError("--output-dir is required")
    if args.E < 1:
        raise ConfigError("--E must be >= 1")
    seed = args.seed or 0
    data = load_dataset(args.input)
    kind = _augment_kind(args.augment_kind, data)
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    n = len(data) if args.limit is None else min(args.limit, len(data))
    ext = "ppm" if data.image_shape[2] == 3 else "pgm"
    with open(out / "manifest.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["filename", "label", "source", "candidate", "op1", "p1", "m1", "op2", "p2", "m2"])
        for i in range(n):
            streams = [rngs.stream(seed, rngs.EXPAND, 0, i, j) for j in range(args.E)]
            cands = make_candidates(data.images[i], streams, data.images, kind, i)
            for j, (t, img) in enumerate(zip(cands.sub_policies, cands.images)):
                name = f"{i:06d}_{j:02d}.{ext}"
                write_image(out / name, img)
                w.writerow([name, int(data.labels[i]), i, j,
                            t.op1.kind.value, f"{t.op1.p:.6f}", f"{t.op1.m:.6f}",
                            t.op2.kind.value, f"{t.op2.p:.6f}", f"{t.op2.m:.6f}"])
    print(json.dumps({"images": n, "variants": n * args.E, "output_dir": str(out)}))
    return 0


def cmd_measure(args) -> int:
    if args.k < 2:
        raise ConfigError("--k must be >= 2")
    seed = args.seed or 0
    model = load_checkpoint(args.checkpoint)
    data = load_dataset(args.dataset)
    augmenter = Augmenter(args.strategy, _augment_kind(args.augment_kind, data), args.E)
    result = {"strategy": args.strategy, "k": args.k}
    if args.metric in ("all", "variance"):
        result["variance_diversity"] = dataset_variance_diversity(model, data.images, augmenter, args.k, seed)
    if args.metric in ("all", "affinity"):
        result["affinity"] = affinity(model, data.images, data.labels, augmenter, seed)
    if args.metric in ("all", "loss"):
        result["loss_diversity"] = dataset_loss_diversity(model, data.images, data.labels,
                                                          augmenter, args.k, seed)
    print(json.dumps(result, sort_keys=True))
    return 0


def read_vectors_csv(path) -> np.ndarray:
    rows = []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].startswith("#"):
                continue
            try:
                rows.append([float(v) for v in row])
            except ValueError:
                if rows:
                    raise
                continue  # header
    if not rows:
        raise ValueError(f"{path}: no vectors")
    return np.array(rows, dtype=np.float64)


def cmd_select_demo(args) -> int:
    vectors = read_vectors_csv(args.csv)
    if not 1 <= args.S <= len(vectors):
        raise ConfigError(f"--S must lie in [1, {len(vectors)}]")
    seed = args.seed or 0
    rows = [
        ("kmeans++", kmeanspp_select(vectors, args.S, rngs.stream(seed, rngs.SELECT))),
        ("brute-force", brute_force_max_variance(vectors, args.S)),
        ("random", random_select(vectors, args.S, rngs.stream(seed, rngs.BASELINE))),
    ]
    for name, res in rows:
        print(f"{name:<12} indices={list(res.chosen_indices)} diversity={res.diversity!r}")
    return 0


COMMANDS = {"train": cmd_train, "augment": cmd_augment, "measure": cmd_measure,
            "select-demo": cmd_select_demo}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        log.debug("failure", exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
