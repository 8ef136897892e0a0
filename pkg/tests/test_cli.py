import csv
import json

import numpy as np
import pytest

from divaug.cli import main
from divaug.data import load_dataset

DATA = "synthetic:classes=3,samples_per_class=6,size=16,seed=1"


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture(scope="module")
def trained_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("train")
    assert main(["train", "--dataset", DATA, "--epochs", "2", "--E", "4", "--S", "2",
                 "--hidden", "8", "--batch-size", "6", "--output-dir", str(out)]) == 0
    return out


def test_select_demo(tmp_path, capsys):
    p = tmp_path / "v.csv"
    p.write_text("p0,p1\n1,0\n1,0\n0,1\n")
    code, out, _ = run(capsys, "select-demo", "--csv", str(p), "--S", "2", "--seed", "3")
    assert code == 0
    lines = out.splitlines()
    assert lines[1] == "brute-force  indices=[0, 2] diversity=0.5"
    assert lines[0].startswith("kmeans++") and "diversity=0.5" in lines[0]
    assert run(capsys, "select-demo", "--csv", str(p), "--S", "4")[0] == 2


def test_usage_errors(capsys, tmp_path):
    assert run(capsys, "train", "--epochs", "0", "--output-dir", str(tmp_path))[0] == 2
    assert run(capsys, "frobnicate")[0] == 2
    assert run(capsys, "train", "--dataset", DATA)[0] == 2  # no output dir
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("colour = blue\n")
    code, _, err = run(capsys, "train", "--config", str(cfg), "--output-dir", str(tmp_path))
    assert code == 2 and "unknown config keys" in err


def test_runtime_error_exit_1(capsys, tmp_path):
    code, _, err = run(capsys, "train", "--dataset", f"cifar10:{tmp_path}/missing.bin",
                       "--output-dir", str(tmp_path / "o"))
    assert code == 1 and err.startswith("error:")


def test_train_outputs(trained_dir):
    for f in ("metrics.jsonl", "metrics.csv", "subpolicy_stats.csv", "checkpoint.dvag"):
        assert (trained_dir / f).is_file()


def test_train_from_config_with_override(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(f"dataset = {DATA}\nepochs = 3\nE = 4\nS = 2\nhidden = 4\nstrategy = identity\n")
    code, out, _ = run(capsys, "train", "--config", str(cfg), "--epochs", "1",
                       "--output-dir", str(tmp_path / "o"))
    assert code == 0
    assert json.loads(out)["steps"] == 1  # 18 images, batch 32, one epoch


def test_measure(trained_dir, capsys):
    ckpt = str(trained_dir / "checkpoint.dvag")
    code, out, _ = run(capsys, "measure", "--checkpoint", ckpt, "--dataset", DATA, "--strategy", "identity")
    assert code == 0
    res = json.loads(out)
    assert res["variance_diversity"] == 0.0 and res["affinity"] == 0.0
    code, out, _ = run(capsys, "measure", "--checkpoint", ckpt, "--dataset", DATA, "--strategy", "divaug",
                       "--metric", "variance", "--E", "4")
    assert code == 0 and json.loads(out)["variance_diversity"] > 0
    assert run(capsys, "measure", "--checkpoint", ckpt, "--dataset", DATA, "--strategy", "divaug",
               "--k", "1")[0] == 2


def test_augment_writes_variants(tmp_path, capsys):
    out = tmp_path / "aug"
    code, stdout, _ = run(capsys, "augment", "--input", DATA, "--E", "3", "--limit", "4",
                          "--output-dir", str(out), "--seed", "5")
    assert code == 0 and json.loads(stdout)["variants"] == 12
    rows = list(csv.DictReader(open(out / "manifest.csv")))
    assert len(rows) == 12
    assert rows[0]["filename"] == "000000_00.ppm"
    assert {r["candidate"] for r in rows} == {"0", "1", "2"}
    again = load_dataset(f"dir:{out}")
    assert again.images.shape == (12, 16, 16, 3)
    # same seed, same bytes
    out2 = tmp_path / "aug2"
    assert main(["augment", "--input", DATA, "--E", "3", "--limit", "4", "--output-dir", str(out2),
                 "--seed", "5"]) == 0
    assert (out / "manifest.csv").read_bytes() == (out2 / "manifest.csv").read_bytes()
    assert np.array_equal(load_dataset(f"dir:{out2}").images, again.images)
