import csv
import json
import os

import numpy as np
import pytest
import yaml

from bnn_align.cli import main
from bnn_align.data import Dataset, split_pool, write_mnist_dir

TOY = {
    "model": {"widths": [1, 8, 8, 1], "task": "regression", "noise_std": 0.2},
    "train": {"batch_size": 20, "epochs": 5, "learning_rate": 1e-4, "prior_var": 1.0},
    "eval": {"n_taus": 5, "n_mc_test": 8},
    "data": {"source": "synthetic", "train_size": 40, "test_size": 30},
    "slice": {"resolution": 4},
    "profile": {"widths": [3, 5]},
}


def write_config(tmp_path, raw, name="c.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(raw))
    return str(path)


def read_csv(path):
    with open(path) as f:
        return list(csv.DictReader(f))


@pytest.fixture
def toy(tmp_path):
    return write_config(tmp_path, TOY), str(tmp_path / "out")


def run_pipeline(cfg, out):
    assert main(["train", "--config", cfg, "--out", out]) == 0
    assert main(["align", "--config", cfg, "--out", out]) == 0
    assert main(["barrier", "--config", cfg, "--out", out]) == 0
    perms = os.path.join(out, "perms.txt")
    assert main(["barrier", "--config", cfg, "--out", out, "--perms", perms]) == 0
    assert main(["slice", "--config", cfg, "--out", out, "--perms", perms]) == 0
    assert main(["profile", "--config", cfg, "--out", out]) == 0


def test_full_pipeline(toy):
    cfg, out = toy
    run_pipeline(cfg, out)
    files = set(os.listdir(out))
    for name in ["posterior_seed1.bin", "posterior_seed2.bin", "trace_seed1.csv", "perms.txt", "align_report.json",
                 "barrier_naive.csv", "barrier_aligned.csv", "slice.csv", "profile.csv"]:
        assert name in files
    for cmd in ["train", "align", "barrier_naive", "barrier_aligned", "slice", "profile"]:
        m = json.load(open(os.path.join(out, f"manifest_{cmd}.json")))
        assert len(m["config_sha256"]) == 64 and m["wall_s"] >= 0
        assert set(m["versions"]) >= {"bnn_align", "numpy", "python"}
        assert m["seeds"]["seed0"] == 1
    rows = read_csv(os.path.join(out, "barrier_aligned.csv"))
    assert [r["split"] for r in rows] == ["train"] * 5 + ["test"] * 5
    assert len(read_csv(os.path.join(out, "trace_seed2.csv"))) == 5
    assert len(read_csv(os.path.join(out, "slice.csv"))) == 16
    prof = read_csv(os.path.join(out, "profile.csv"))
    assert len(prof) == 4 and all(float(r["wall_ms"]) > 0 for r in prof)
    assert {r["mode"] for r in prof} == {"distribution", "point"}
    summary = json.load(open(os.path.join(out, "barrier_naive.json")))
    assert set(summary) >= {"train", "test"}


def test_rerun_reproduces_csv_numbers(tmp_path):
    cfg = write_config(tmp_path, TOY)
    outs = [str(tmp_path / "a"), str(tmp_path / "b")]
    for out in outs:
        run_pipeline(cfg, out)
    for name in ["barrier_naive.csv", "barrier_aligned.csv", "slice.csv"]:
        assert read_csv(os.path.join(outs[0], name)) == read_csv(os.path.join(outs[1], name))
    for name in ["trace_seed1.csv", "trace_seed2.csv"]:
        strip = lambda rows: [{k: v for k, v in r.items() if k != "wall_ms"} for r in rows]
        assert strip(read_csv(os.path.join(outs[0], name))) == strip(read_csv(os.path.join(outs[1], name)))
    for name in ["posterior_seed1.bin", "perms.txt"]:
        assert open(os.path.join(outs[0], name), "rb").read() == open(os.path.join(outs[1], name), "rb").read()


def test_seed_override_and_slice_tau(toy):
    cfg, out = toy
    assert main(["train", "--config", cfg, "--out", out, "--seed", "9"]) == 0
    assert os.listdir(out).count("posterior_seed9.bin") == 1 and "posterior_seed1.bin" not in os.listdir(out)
    c0 = os.path.join(out, "posterior_seed9.bin")
    assert main(["train", "--config", cfg, "--out", out, "--seed", "4"]) == 0
    c1 = os.path.join(out, "posterior_seed4.bin")
    assert main(["slice", "--config", cfg, "--out", out, "--ckpt0", c0, "--ckpt1", c1, "--tau", "0.25"]) == 0
    assert json.load(open(os.path.join(out, "manifest_slice.json")))["tau"] == 0.25


def test_idx_source(tmp_path):
    rng = np.random.default_rng(0)
    pool = Dataset(rng.integers(0, 256, (80, 16)).astype(float), np.repeat(np.arange(10), 8), "classification", 10)
    write_mnist_dir(*split_pool(pool, 50, 20), tmp_path / "idx", side=4)
    raw = {
        "model": {"widths": [16, 6, 10]},
        "train": {"batch_size": 10, "epochs": 2, "learning_rate": 1e-4},
        "eval": {"n_taus": 3, "n_mc_test": 4},
        "data": {"path": "idx", "train_size": 40, "test_size": 20},
    }
    cfg, out = write_config(tmp_path, raw), str(tmp_path / "out")
    for cmd in (["train"], ["align"], ["barrier"]):
        assert main(cmd + ["--config", cfg, "--out", out]) == 0
    rows = read_csv(os.path.join(out, "barrier_naive.csv"))
    assert len(rows) == 6 and all(0 <= float(r["acc"]) <= 1 for r in rows)


def test_config_errors_exit_2(tmp_path, capsys):
    assert main(["train", "--config", str(tmp_path / "none.yaml")]) == 2
    bad = write_config(tmp_path, {**TOY, "eval": {"n_taus": 1}}, "bad.yaml")
    assert main(["train", "--config", bad, "--out", str(tmp_path / "o")]) == 2
    assert "eval.n_taus" in capsys.readouterr().err
    cfg = write_config(tmp_path, TOY)
    assert main(["align", "--config", cfg, "--out", str(tmp_path / "empty")]) == 2
    assert main(["barrier", "--config", write_config(tmp_path, {"data": {"path": "missing"}}, "m.yaml")]) == 2


def test_bad_perms_exit_2(toy, tmp_path):
    cfg, out = toy
    assert main(["train", "--config", cfg, "--out", out]) == 0
    (tmp_path / "p.txt").write_text("0 1 2\n")
    assert main(["barrier", "--config", cfg, "--out", out, "--perms", str(tmp_path / "p.txt")]) == 2
    assert main(["barrier", "--config", cfg, "--out", out, "--perms", str(tmp_path / "nope.txt")]) == 2


def test_divergence_exit_3(tmp_path, capsys):
    raw = {**TOY, "train": {**TOY["train"], "learning_rate": 1e3, "epochs": 30}}
    assert main(["train", "--config", write_config(tmp_path, raw), "--out", str(tmp_path / "o")]) == 3
    assert "numerical failure" in capsys.readouterr().err


def test_unknown_subcommand():
    with pytest.raises(SystemExit):
        main(["merge", "--config", "x"])
