"""Training loop with expand -> score -> select -> train per mini-batch."""
from __future__ import annotations

import dataclasses
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import rng as rngs
from .data import DatasetSplit, load_dataset
from .imageops import DATASET_KINDS, default_augment
from .metrics import (MetricsRecord, MetricsWriter, SubPolicyStats, record_subpolicy_stats,
                      write_subpolicy_stats)
from .oracle import (DivergenceError, OracleModel, accuracy, channel_stats, init_model,
                     predict_proba, save_checkpoint, sgd_step)
from .selection import kmeanspp_select, random_select, variance_diversity
from .strategies import STRATEGIES, make_candidates

log = logging.getLogger(__name__)

CHECKPOINT_NAME = "checkpoint.dvag"
AUGMENT_KINDS = ("auto", "none", *DATASET_KINDS)


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    dataset: str = "synthetic:classes=3,samples_per_class=100,size=32,seed=0"
    E: int = 8
    S: int = 4
    epochs: int = 10
    batch_size: int = 32
    lr: float = 0.05
    weight_decay: float = 5e-4
    seed: int = 0
    strategy: str = "divaug"
    output_dir: str = ""
    workers: int = 1
    model: str = "mlp"
    hidden: int = 64
    eval_dataset: str = ""
    augment_kind: str = "auto"

    def validate(self) -> RunConfig:
        if not 1 <= self.S <= self.E:
            raise ConfigError(f"need 1 <= S <= E, got S={self.S}, E={self.E}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.lr < 0:
            raise ConfigError(f"lr must be >= 0, got {self.lr}")
        if self.weight_decay < 0:
            raise ConfigError(f"weight_decay must be >= 0, got {self.weight_decay}")
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"strategy must be one of {', '.join(STRATEGIES)}, got {self.strategy!r}")
        if self.model not in ("mlp", "linear"):
            raise ConfigError(f"model must be 'mlp' or 'linear', got {self.model!r}")
        if self.model == "mlp" and self.hidden < 1:
            raise ConfigError(f"hidden must be >= 1, got {self.hidden}")
        if self.augment_kind not in AUGMENT_KINDS:
            raise ConfigError(f"augment_kind must be one of {', '.join(AUGMENT_KINDS)}")
        return self

    @classmethod
    def from_mapping(cls, values: dict[str, str]) -> RunConfig:
        """Build from string values, converting each to its field's type."""
        fields = {f.name: f for f in dataclasses.fields(cls)}
        unknown = sorted(set(values) - set(fields))
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        kwargs = {}
        for key, raw in values.items():
            conv = {"int": int, "float": float, "str": str}[fields[key].type]
            try:
                kwargs[key] = conv(raw)
            except ValueError as exc:
                raise ConfigError(f"{key}: cannot parse {raw!r} as {fields[key].type}") from exc
        return cls(**kwargs)


def read_config_file(path) -> dict[str, str]:
    """Flat ``key = value`` lines; blank lines and ``#`` comments are ignored."""
    values = {}
    for n, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{n}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key in values:
            raise ConfigError(f"{path}:{n}: duplicate key {key!r}")
        values[key] = value
    return values


def load_config(path=None, overrides: dict | None = None) -> RunConfig:
    values = read_config_file(path) if path else {}
    values.update({k: str(v) for k, v in (overrides or {}).items() if v is not None})
    return RunConfig.from_mapping(values).validate()


@dataclass
class WorkCounters:
    """Per-step instrumentation: oracle forward passes and trained images."""

    forward_per_step: list[int] = field(default_factory=list)
    train_per_step: list[int] = field(default_factory=list)
    batch_sizes: list[int] = field(default_factory=list)


@dataclass
class TrainResult:
    model: OracleModel
    records: list[MetricsRecord]
    subpolicy_stats: list[SubPolicyStats]
    counters: WorkCounters
    batch_trace: list[dict] = field(default_factory=list)


def resolve_augment_kind(config: RunConfig, data: DatasetSplit) -> str | None:
    if config.augment_kind == "none":
        return None
    if config.augment_kind == "auto":
        return data.kind if data.kind in DATASET_KINDS else "synthetic"
    return config.augment_kind


class _NullWriter:
    def __init__(self):
        self.records = []

    def write(self, record):
        self.records.append(record)

    def close(self):
        pass


def _build_batch(config, data, idx, epoch, snapshot, kind, mapper, counters, trace_sink):
    """Return training images/labels for one mini-batch plus per-image diversities."""
    seed, E, S = config.seed, config.E, config.S
    labels = data.labels[idx]
    pool = data.images[idx]

    if config.strategy == "identity":
        counters.forward_per_step.append(0)
        return data.images[idx], labels, [0.0] * len(idx), [], []

    if config.strategy == "default-only":
        def work(src):
            if kind is None:
                return [data.images[src].copy() for _ in range(S)]
            return [default_augment(data.images[src], kind, rngs.stream(seed, rngs.EXPAND, epoch, src, j))
                    for j in range(S)]

        groups = list(mapper(work, idx))
        flat = np.stack([im for g in groups for im in g])
        probs = predict_proba(snapshot, flat)
        counters.forward_per_step.append(len(flat))
        divs = [variance_diversity(probs[i * S:(i + 1) * S]) for i in range(len(idx))]
        return flat, np.repeat(labels, S), divs, [], []

    def work(src):
        streams = [rngs.stream(seed, rngs.EXPAND, epoch, src, j) for j in range(E)]
        return make_candidates(data.images[src], streams, pool, kind, int(src))

    cand_sets = list(mapper(work, idx))
    flat = np.stack([im for c in cand_sets for im in c.images])
    probs = predict_proba(snapshot, flat)
    counters.forward_per_step.append(len(flat))

    images, divs, baseline_divs, selections = [], [], [], []
    for i, (src, cands) in enumerate(zip(idx, cand_sets)):
        cands.set_prob_vectors(probs[i * E:(i + 1) * E])
        g = rngs.stream(seed, rngs.SELECT, epoch, src)
        if config.strategy == "divaug":
            res = kmeanspp_select(cands.prob_vectors, S, g)
            base = random_select(cands.prob_vectors, S, rngs.stream(seed, rngs.BASELINE, epoch, src))
            baseline_divs.append(base.diversity)
        else:
            res = random_select(cands.prob_vectors, S, g)
        images.extend(cands.images[j] for j in res.chosen_indices)
        divs.append(res.diversity)
        chosen = set(res.chosen_indices)
        selections.extend((t, j in chosen) for j, t in enumerate(cands.sub_policies))
        if trace_sink is not None:
            trace_sink.append({"epoch": epoch, "source": int(src), "chosen": res.chosen_indices,
                               "candidates": cands})
    return np.stack(images), np.repeat(labels, S), divs, baseline_divs, selections


def train_with_divaug(config: RunConfig, data: DatasetSplit | None = None,
                      eval_data: DatasetSplit | None = None, trace: bool = False) -> TrainResult:
    """Train the oracle with the configured augmentation strategy.

    Every mini-batch is scored against one snapshot of the model taken before
    the batch, then a single SGD step is taken on the mean loss over the
    ``batch_size x S`` selected images. Files are written to
    ``config.output_dir`` when it is non-empty.
    """
    config.validate()
    if data is None:
        data = load_dataset(config.dataset)
    if eval_data is None and config.eval_dataset:
        eval_data = load_dataset(config.eval_dataset)
    if len(data) == 0:
        raise ValueError("training set is empty")
    kind = resolve_augment_kind(config, data)

    mean, std = channel_stats(data.images)
    model = init_model(data.image_shape, data.num_classes, rngs.stream(config.seed, rngs.INIT),
                       arch=config.model, hidden=config.hidden, mean=mean, std=std)

    out_dir = Path(config.output_dir) if config.output_dir else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        writer = MetricsWriter(out_dir / "metrics.jsonl", out_dir / "metrics.csv")
    else:
        writer = _NullWriter()

    ctx = {"strategy": config.strategy}
    counters = WorkCounters()
    stats: list[SubPolicyStats] = []
    trace_sink = [] if trace else None
    executor = ThreadPoolExecutor(config.workers) if config.workers > 1 else None
    mapper = executor.map if executor is not None else map
    n, step = len(data), 0
    try:
        for epoch in range(config.epochs):
            perm = rngs.stream(config.seed, rngs.SHUFFLE, epoch).permutation(n)
            selections = []
            for start in range(0, n, config.batch_size):
                idx = perm[start:start + config.batch_size]
                snapshot = model
                x, y, divs, base_divs, sel = _build_batch(config, data, idx, epoch, snapshot, kind,
                                                          mapper, counters, trace_sink)
                selections.extend(sel)
                try:
                    model, loss = sgd_step(model, x, y, config.lr, config.weight_decay)
                except DivergenceError as exc:
                    raise DivergenceError(f"epoch {epoch} step {step}: {exc}; "
                                          f"try a smaller lr (currently {config.lr})") from exc
                counters.train_per_step.append(len(x))
                counters.batch_sizes.append(len(idx))
                writer.write(MetricsRecord(epoch, step, "loss", loss, ctx))
                writer.write(MetricsRecord(epoch, step, "batch_diversity", float(np.mean(divs)), ctx))
                if base_divs:
                    writer.write(MetricsRecord(epoch, step, "batch_diversity_random",
                                               float(np.mean(base_divs)), ctx))
                step += 1
            writer.write(MetricsRecord(epoch, step, "train_accuracy",
                                       accuracy(model, data.images, data.labels), ctx))
            if eval_data is not None:
                writer.write(MetricsRecord(epoch, step, "eval_accuracy",
                                           accuracy(model, eval_data.images, eval_data.labels), ctx))
            if selections:
                stats.append(record_subpolicy_stats(selections, epoch))
            log.info("epoch %d done: loss %.4f", epoch, loss)
    finally:
        if executor is not None:
            executor.shutdown()
        writer.close()

    if out_dir is not None:
        write_subpolicy_stats(out_dir / "subpolicy_stats.csv", stats)
        save_checkpoint(model, out_dir / CHECKPOINT_NAME)
    return TrainResult(model, writer.records, stats, counters, trace_sink or [])
