"""Run the desk-scale MNIST pipeline end to end and print the barriers.

    python scripts/run_desk_experiment.py [--config configs/mnist_desk.yaml] [--out runs/mnist_desk]

Trains both seeds, aligns them, evaluates the naive and aligned geodesic
barriers, writes a posterior slice through the aligned pair and profiles
alignment time across widths. Every step goes through ``bnn-align``, so
the outputs match what the CLI writes.
"""

import argparse
import json
import os
import sys

from bnn_align import config as config_mod
from bnn_align.cli import main
from bnn_align.data import find_mnist_files

HERE = os.path.dirname(os.path.abspath(__file__))


def ensure_data(cfg_path):
    cfg = config_mod.load(cfg_path)
    if cfg.data.source != "idx":
        return
    try:
        find_mnist_files(cfg.data.path)
    except FileNotFoundError:
        sys.path.insert(0, HERE)
        from prepare_mnist5k import prepare

        print(f"preparing {cfg.data.path}")
        prepare(cfg.data.path)


def run(cfg_path, out):
    ensure_data(cfg_path)
    common = ["--config", cfg_path, "--out", out, "-v"]
    perms = os.path.join(out, "perms.txt")
    steps = [
        ["train"],
        ["align"],
        ["barrier"],
        ["barrier", "--perms", perms],
        ["slice", "--perms", perms],
        ["profile"],
    ]
    for step in steps:
        code = main(step + common)
        if code:
            return code
    for label in ("naive", "aligned"):
        with open(os.path.join(out, f"barrier_{label}.json")) as f:
            s = json.load(f)
        print(
            f"{label:>8}: train {s['train']['barrier_per_datum']:.4f}  "
            f"test {s['test']['barrier_per_datum']:.4f} nats/datum"
        )
    return 0


if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--config", default=os.path.join(HERE, "..", "configs", "mnist_desk.yaml"))
    p.add_argument("--out", default=None)
    a = p.parse_args()
    cfg_path = os.path.normpath(a.config)
    sys.exit(run(cfg_path, a.out or config_mod.load(cfg_path).output_dir))
