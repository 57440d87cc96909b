"""Command line driver: ``bnn-align {train,align,barrier,slice,profile}``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import os
import platform
import sys
import time

import numpy as np
import scipy

from . import __version__, checkpoint
from . import config as config_mod
from .align import PermutationSet, align_point_estimates, align_posteriors, pushforward
from .bnn import GaussianPosterior, MlpSpec, Prior, sample_params
from .data import load_mnist, normalize_split, synth_regression
from .evaluate import GridConfig, barrier, slice_logposterior
from .interp import geodesic
from .vi import TrainingDiverged, train_vi, trace_to_csv

log = logging.getLogger("bnn_align")

EXIT_CONFIG = 2
EXIT_NUMERIC = 3


def spec_from_config(cfg) -> MlpSpec:
    return MlpSpec(tuple(cfg.model.widths), cfg.model.task, cfg.model.noise_std)


def load_data(cfg):
    d = cfg.data
    if d.source == "synthetic":
        train = synth_regression(d.train_size, d.noise_std, seed=d.split_seed, split="train")
        test = synth_regression(d.test_size, d.noise_std, seed=d.split_seed + 1, split="test")
        return train, test
    train, test = load_mnist(d.path)
    return normalize_split(train, test, d.train_size, d.test_size, seed=d.split_seed, pixels=True)


def ckpt_path(out, seed):
    return os.path.join(out, f"posterior_seed{seed}.bin")


def write_manifest(out, command, cfg, t0, outputs, extra=None):
    manifest = {
        "command": command,
        "config_sha256": cfg.digest(),
        "seeds": {"seed0": cfg.seeds.seed0, "seed1": cfg.seeds.seed1, "train": cfg.train.seed},
        "versions": {
            "bnn_align": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
        "wall_s": time.perf_counter() - t0,
        "outputs": sorted(os.path.basename(p) for p in outputs),
    }
    if extra:
        manifest.update(extra)
    path = os.path.join(out, f"manifest_{command}.json")
    with open(path, "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
    return path


def _load_pair(args, cfg):
    p0 = args.ckpt0 or ckpt_path(args.out, cfg.seeds.seed0)
    p1 = args.ckpt1 or ckpt_path(args.out, cfg.seeds.seed1)
    for p in (p0, p1):
        if not os.path.exists(p):
            raise config_mod.ConfigError([f"checkpoint not found: {p}"])
    q0, prior, _, _ = checkpoint.load(p0)
    q1, _, _, _ = checkpoint.load(p1)
    if q0.spec != q1.spec:
        raise config_mod.ConfigError([f"checkpoints have different architectures: {q0.spec.widths} vs {q1.spec.widths}"])
    return q0, q1, prior


def _load_perms(path, spec):
    if not os.path.exists(path):
        raise config_mod.ConfigError([f"--perms: file not found: {path}"])
    perms = PermutationSet.load(path)
    try:
        perms.check(spec)
    except ValueError as e:
        raise config_mod.ConfigError([f"--perms: {e}"]) from e
    return perms


def cmd_train(args, cfg):
    t0 = time.perf_counter()
    spec = spec_from_config(cfg)
    train, _ = load_data(cfg)
    seeds = [args.seed] if args.seed is not None else [cfg.seeds.seed0, cfg.seeds.seed1]
    outputs = []
    for seed in seeds:
        tcfg = dataclasses.replace(cfg.train, seed=seed)
        log.info("training seed %d on %d examples", seed, len(train))
        q, trace = train_vi(spec, train, tcfg)
        path = ckpt_path(args.out, seed)
        checkpoint.save(path, q, Prior(tcfg.prior_var), seed)
        tpath = os.path.join(args.out, f"trace_seed{seed}.csv")
        trace_to_csv(trace, tpath)
        outputs += [path, tpath]
    outputs.append(write_manifest(args.out, "train", cfg, t0, outputs))
    return outputs


def cmd_align(args, cfg):
    t0 = time.perf_counter()
    q0, q1, _ = _load_pair(args, cfg)
    a = cfg.align
    perms, report = align_posteriors(
        q0, q1, a.cost, a.max_sweeps, a.seed, a.include_bias, a.kl_weighting, a.init
    )
    ppath = os.path.join(args.out, "perms.txt")
    perms.save(ppath)
    rpath = os.path.join(args.out, "align_report.json")
    with open(rpath, "w") as f:
        json.dump(report.to_dict(), f, indent=2)
    log.info("alignment: %d sweeps, converged=%s", report.sweeps, report.converged)
    return [ppath, rpath, write_manifest(args.out, "align", cfg, t0, [ppath, rpath])]


def cmd_barrier(args, cfg):
    t0 = time.perf_counter()
    q0, q1, _ = _load_pair(args, cfg)
    label = "naive"
    if args.perms:
        q1 = pushforward(q1, _load_perms(args.perms, q0.spec))
        label = "aligned"
    train, test = load_data(cfg)
    e = cfg.eval
    path = os.path.join(args.out, f"barrier_{label}.csv")
    summary = {}
    for k, data in enumerate((train, test)):
        rep = barrier(q0, q1, data, e.n_taus, e.n_mc_test, e.seed, e.path)
        rep.to_csv(path, append=k > 0)
        summary[data.split] = {"barrier": rep.barrier, "barrier_per_datum": rep.barrier_per_datum}
        log.info("%s barrier (%s): %.4f nats/datum", label, data.split, rep.barrier_per_datum)
    spath = os.path.join(args.out, f"barrier_{label}.json")
    with open(spath, "w") as f:
        json.dump({"path": e.path, "label": label, **summary}, f, indent=2, sort_keys=True)
    return [path, spath, write_manifest(args.out, f"barrier_{label}", cfg, t0, [path, spath])]


def slice_anchors(q0, q1, perms, tau, seed):
    """One draw each from q0, the geodesic point at ``tau`` and the (aligned) q1."""
    if perms is not None:
        q1 = pushforward(q1, perms)
    qt = geodesic(q0, q1, tau)
    noise = np.random.default_rng(seed).standard_normal((3, q0.spec.n_params))
    return sample_params(q0, noise[0]), sample_params(qt, noise[1]), sample_params(q1, noise[2])


def cmd_slice(args, cfg):
    t0 = time.perf_counter()
    q0, q1, prior = _load_pair(args, cfg)
    perms = _load_perms(args.perms, q0.spec) if args.perms else None
    tau = cfg.slice.tau if args.tau is None else args.tau
    train, _ = load_data(cfg)
    s = cfg.slice
    th_a, th_b, th_c = slice_anchors(q0, q1, perms, tau, s.sample_seed)
    grid = GridConfig(s.a_min, s.a_max, s.b_min, s.b_max, s.resolution)
    try:
        sg = slice_logposterior(q0.spec, train, prior, cfg.train.temperature, th_a, th_b, th_c, grid)
    except ValueError as e:
        raise config_mod.ConfigError([f"slice: {e}"]) from e
    path = os.path.join(args.out, "slice.csv")
    sg.to_csv(path)
    return [path, write_manifest(args.out, "slice", cfg, t0, [path], {"tau": tau})]


def random_posterior(spec, rng, std_scale=0.1):
    mean = rng.standard_normal(spec.n_params) / np.sqrt(spec.widths[0])
    std = std_scale * rng.uniform(0.5, 1.5, spec.n_params)
    return GaussianPosterior(spec, mean, std)


def cmd_profile(args, cfg):
    t0 = time.perf_counter()
    widths = args.widths or cfg.profile.widths
    rng = np.random.default_rng(cfg.profile.seed)
    m, a = cfg.model, cfg.align
    rows = []
    for w in widths:
        spec = MlpSpec((m.widths[0],) + (w,) * (len(m.widths) - 2) + (m.widths[-1],), m.task, m.noise_std)
        q0, q1 = random_posterior(spec, rng), random_posterior(spec, rng)
        _, rep = align_posteriors(q0, q1, max_sweeps=a.max_sweeps, seed=a.seed, init=a.init)
        rows.append({"width": w, "mode": "distribution", "wall_ms": max(rep.wall_ms, 1e-6), "sweeps": rep.sweeps})
        _, rep = align_point_estimates(q0.mean, q1.mean, spec, max_sweeps=a.max_sweeps, seed=a.seed, init=a.init)
        rows.append({"width": w, "mode": "point", "wall_ms": max(rep.wall_ms, 1e-6), "sweeps": rep.sweeps})
        if rows[-2]["wall_ms"] < rows[-1]["wall_ms"]:
            log.info("width %d: distributional alignment was faster than weight matching", w)
    path = os.path.join(args.out, "profile.csv")
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=["width", "mode", "wall_ms", "sweeps"])
        writer.writeheader()
        writer.writerows(rows)
    return [path, write_manifest(args.out, "profile", cfg, t0, [path])]


COMMANDS = {
    "train": cmd_train,
    "align": cmd_align,
    "barrier": cmd_barrier,
    "slice": cmd_slice,
    "profile": cmd_profile,
}


def build_parser():
    p = argparse.ArgumentParser(prog="bnn-align", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="YAML experiment config")
        sp.add_argument("--out", help="output directory (default: output_dir from the config)")
        sp.add_argument("--seed", type=int, help="override: train only this seed")
        sp.add_argument("-v", "--verbose", action="store_true")
        if name in ("align", "barrier", "slice"):
            sp.add_argument("--ckpt0", help="reference checkpoint (default: <out>/posterior_seed<seed0>.bin)")
            sp.add_argument("--ckpt1", help="checkpoint to align (default: <out>/posterior_seed<seed1>.bin)")
        if name in ("barrier", "slice"):
            sp.add_argument("--perms", help="permutation file from `align`")
        if name == "slice":
            sp.add_argument("--tau", type=float, help="geodesic position of the middle anchor (default 0.5)")
        if name == "profile":
            sp.add_argument("--widths", type=int, nargs="+", help="hidden widths to time")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = config_mod.load(args.config)
        if args.seed is not None:
            cfg.train.seed = args.seed
        cfg.validate(check_files=args.command in ("train", "barrier", "slice"))
        args.out = args.out or cfg.output_dir
        os.makedirs(args.out, exist_ok=True)
        COMMANDS[args.command](args, cfg)
    except config_mod.ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (TrainingDiverged, FloatingPointError) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    return 0


if __name__ == "__main__":
    sys.exit(main())
