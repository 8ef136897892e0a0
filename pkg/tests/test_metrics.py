import csv
import json
import math

import numpy as np
import pytest
from scipy import stats

from divaug.data import generate_synthetic
from divaug.imageops import ALL_KINDS, OpKind, Operation
from divaug.metrics import (MetricsRecord, MetricsWriter, affinity, dataset_loss_diversity,
                            dataset_variance_diversity, loss_diversity, read_metrics_jsonl,
                            record_subpolicy_stats, subpolicy_stats_header, write_subpolicy_stats)
from divaug.oracle import per_item_loss
from divaug.pipeline import RunConfig, train_with_divaug
from divaug.policy import SubPolicy, sample_subpolicy
from divaug.strategies import STRATEGIES, Augmenter


def train_clean(seed=0, n=30):
    split = generate_synthetic(3, n, 16, seed=seed)
    cfg = RunConfig(strategy="identity", epochs=15, batch_size=16, lr=0.05, hidden=32, seed=seed)
    return train_with_divaug(cfg, split).model, split


@pytest.fixture(scope="module")
def trained():
    return train_clean()


def invert_augmenter(image, k, rng, model=None, partner_pool=None):
    return [255 - image for _ in range(k)]


def test_identity_has_zero_diversity_and_affinity(trained):
    model, split = trained
    ident = Augmenter("identity")
    assert dataset_variance_diversity(model, split.images, ident, k=4) == 0.0
    assert affinity(model, split.images, split.labels, ident) == 0.0


def test_divaug_more_diverse_than_identity(trained):
    model, split = trained
    assert dataset_variance_diversity(model, split.images, Augmenter("divaug"), k=4) > 0.0


def test_affinity_bounded(trained):
    model, split = trained
    for name in STRATEGIES:
        assert -1.0 <= affinity(model, split.images, split.labels, Augmenter(name), rng=3) <= 1.0


def test_destructive_augmentation_has_non_positive_affinity():
    outcomes = []
    for seed in range(10):
        model, split = train_clean(seed, n=20)
        outcomes.append(affinity(model, split.images, split.labels, invert_augmenter) <= 0.0)
    assert sum(outcomes) >= 9


def test_loss_diversity_examples(trained):
    model, split = trained
    img = split.images[:1]
    reps = np.repeat(img, 5, axis=0)
    single = per_item_loss(model, img, split.labels[:1])[0]
    assert loss_diversity(model, reps, np.repeat(split.labels[:1], 5)) == pytest.approx(single, rel=1e-12)
    clean = math.fsum(per_item_loss(model, split.images, split.labels)) / len(split)
    ld = dataset_loss_diversity(model, split.images, split.labels, Augmenter("identity"), k=3)
    assert ld == pytest.approx(clean, rel=1e-12)
    assert ld >= 0.0
    with pytest.raises(ValueError):
        loss_diversity(model, split.images[:0], split.labels[:0])


def test_loss_and_variance_diversity_rank_together(trained):
    model, split = trained
    vd, ld = [], []
    for name in STRATEGIES:
        aug = Augmenter(name)
        vd.append(dataset_variance_diversity(model, split.images, aug, k=4, rng=1))
        ld.append(dataset_loss_diversity(model, split.images, split.labels, aug, k=4, rng=1))
    assert stats.spearmanr(vd, ld).statistic > 0


def test_measurement_independent_of_order_and_repeatable(trained):
    model, split = trained
    aug = Augmenter("divaug")
    base = dataset_variance_diversity(model, split.images, aug, k=4, rng=7)
    perm = np.random.default_rng(0).permutation(len(split))
    assert dataset_variance_diversity(model, split.images[perm], aug, k=4, rng=7) == base
    assert dataset_variance_diversity(model, split.images, aug, k=4, rng=7) == base
    with pytest.raises(ValueError):
        dataset_variance_diversity(model, split.images, aug, k=1)


def test_subpolicy_stats_example():
    t = SubPolicy(Operation(OpKind.ROTATE, 0.2, 0.4), Operation(OpKind.INVERT, 0.6, 0.8))
    u = SubPolicy(Operation(OpKind.ROTATE, 1.0, 0.0), Operation(OpKind.CUTOUT, 0.0, 1.0))
    s = record_subpolicy_stats([(t, True), (u, False)], epoch=3)
    assert s.epoch == 3 and s.n_ops == 2
    assert s.op_frequency["Rotate"] == 0.5 and s.op_frequency["Invert"] == 0.5
    assert s.op_frequency["Cutout"] == 0.0
    assert s.mean_applied_p == pytest.approx(0.4) and s.mean_m == pytest.approx(0.6)
    assert math.fsum(s.op_frequency.values()) == 1.0
    with pytest.raises(ValueError):
        record_subpolicy_stats([(t, False)], 0)


def test_subpolicy_stats_uniform_for_random_draws():
    g = np.random.default_rng(0)
    sel = [(sample_subpolicy(g), True) for _ in range(10_000)]
    s = record_subpolicy_stats(sel, 0)
    assert all(abs(f - 1 / 16) <= 0.01 for f in s.op_frequency.values())
    assert abs(math.fsum(s.op_frequency.values()) - 1) <= 1e-9


def test_writers(tmp_path):
    recs = [MetricsRecord(0, 1, "loss", 0.25, {"strategy": "divaug", "split": "train"}),
            MetricsRecord(0, 2, "loss", 1 / 3)]
    with MetricsWriter(tmp_path / "m.jsonl", tmp_path / "m.csv") as w:
        for r in recs:
            w.write(r)
    assert read_metrics_jsonl(tmp_path / "m.jsonl") == recs
    first = json.loads((tmp_path / "m.jsonl").read_text().splitlines()[0])
    assert set(first) == {"epoch", "step", "metric", "value", "context"}
    rows = list(csv.reader(open(tmp_path / "m.csv")))
    assert rows[0] == ["epoch", "step", "metric", "value", "context"]
    assert rows[1] == ["0", "1", "loss", "0.25", "split=train;strategy=divaug"]
    assert float(rows[2][3]) == 1 / 3
    with pytest.raises(ValueError):
        MetricsRecord(0, 0, "loss", float("nan"))


def test_subpolicy_csv(tmp_path):
    g = np.random.default_rng(1)
    stats_ = [record_subpolicy_stats([(sample_subpolicy(g), True) for _ in range(50)], e) for e in range(2)]
    write_subpolicy_stats(tmp_path / "s.csv", stats_)
    rows = list(csv.reader(open(tmp_path / "s.csv")))
    header = subpolicy_stats_header()
    assert rows[0] == header
    assert header[1:17] == [k.value for k in ALL_KINDS]
    for row in rows[1:]:
        assert abs(math.fsum(float(v) for v in row[1:17]) - 1) <= 1e-9
