"""Experiment configuration: a YAML tree mapped onto nested dataclasses.

See ``configs/mnist_desk.yaml`` for a complete annotated example.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass, field

import yaml

from .vi import TrainConfig


class ConfigError(ValueError):
    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("invalid config:\n" + "\n".join(f"  {e}" for e in self.errors))


@dataclass
class ModelConfig:
    widths: list = field(default_factory=lambda: [784, 128, 128, 10])
    task: str = "classification"
    noise_std: float = 1.0


@dataclass
class AlignConfig:
    cost: str = "wasserstein"
    max_sweeps: int = 100
    include_bias: bool = True
    kl_weighting: str = "variance"
    init: str = "forward"
    seed: int = 0


@dataclass
class EvalConfig:
    n_taus: int = 25
    n_mc_test: int = 128
    path: str = "geodesic"
    seed: int = 0


@dataclass
class DataConfig:
    # "idx": a directory with the four standard MNIST-family files
    # "synthetic": the 1-D two-interval regression toy
    source: str = "idx"
    path: str = "data/mnist"
    train_size: int | None = None
    test_size: int | None = None
    split_seed: int = 0
    noise_std: float = 0.2


@dataclass
class SliceConfig:
    tau: float = 0.5
    resolution: int = 21
    a_min: float = -0.5
    a_max: float = 1.5
    b_min: float = -0.5
    b_max: float = 1.5
    sample_seed: int = 0


@dataclass
class ProfileConfig:
    widths: list = field(default_factory=lambda: [16, 32, 64, 128])
    seed: int = 0


@dataclass
class SeedsConfig:
    seed0: int = 1
    seed1: int = 2


@dataclass
class ExperimentConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    align: AlignConfig = field(default_factory=AlignConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    data: DataConfig = field(default_factory=DataConfig)
    slice: SliceConfig = field(default_factory=SliceConfig)
    profile: ProfileConfig = field(default_factory=ProfileConfig)
    seeds: SeedsConfig = field(default_factory=SeedsConfig)
    output_dir: str = "runs/default"

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)

    def digest(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()

    def validate(self, check_files: bool = True):
        errors = []
        m = self.model
        if not isinstance(m.widths, list) or len(m.widths) < 2 or any(
            not isinstance(w, int) or w < 1 for w in m.widths
        ):
            errors.append("model.widths: need a list of >= 2 positive integers")
        if m.task not in ("classification", "regression"):
            errors.append(f"model.task: unknown task {m.task!r}")
        if not m.noise_std > 0:
            errors.append("model.noise_std: must be > 0")
        try:
            self.train.validate()
        except ValueError as e:
            errors.append(f"train: {e}")
        if self.align.cost not in ("wasserstein", "kl"):
            errors.append(f"align.cost: must be 'wasserstein' or 'kl', got {self.align.cost!r}")
        if self.align.kl_weighting not in ("variance", "std"):
            errors.append("align.kl_weighting: must be 'variance' or 'std'")
        if self.align.init not in ("forward", "identity"):
            errors.append(f"align.init: must be 'forward' or 'identity', got {self.align.init!r}")
        if self.align.max_sweeps < 1:
            errors.append("align.max_sweeps: must be >= 1")
        if self.eval.n_taus < 2:
            errors.append("eval.n_taus: must be >= 2")
        if self.eval.n_mc_test < 1:
            errors.append("eval.n_mc_test: must be >= 1")
        if self.eval.path not in ("geodesic", "mixture"):
            errors.append(f"eval.path: must be 'geodesic' or 'mixture', got {self.eval.path!r}")
        if not 0 <= self.slice.tau <= 1:
            errors.append("slice.tau: must lie in [0, 1]")
        if self.slice.resolution < 2:
            errors.append("slice.resolution: must be >= 2")
        if self.seeds.seed0 == self.seeds.seed1:
            errors.append("seeds: seed0 and seed1 must differ")
        d = self.data
        if d.source == "idx":
            if check_files:
                from .data import find_mnist_files

                try:
                    find_mnist_files(d.path)
                except FileNotFoundError as e:
                    errors.append(f"data.path: missing data file {e.args[0]}")
        elif d.source == "synthetic":
            if m.task != "regression" or m.widths[0] != 1:
                errors.append("data.source: synthetic data needs a regression model with input width 1")
            if (d.train_size or 0) < 2 or (d.test_size or 0) < 2:
                errors.append("data.train_size/test_size: synthetic data needs explicit sizes >= 2")
        else:
            errors.append(f"data.source: must be 'idx' or 'synthetic', got {d.source!r}")
        if errors:
            raise ConfigError(errors)
        return self


def _build(cls, raw, where):
    if raw is None:
        return cls()
    if not isinstance(raw, dict):
        raise ConfigError([f"{where or 'config'}: expected a mapping"])
    names = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(raw) - set(names))
    if unknown:
        raise ConfigError([f"{where}{'.' if where else ''}{k}: unknown key" for k in unknown])
    kwargs = {}
    for k, v in raw.items():
        path = f"{where}.{k}" if where else k
        sub = _SECTIONS.get(k) if not where else None
        kwargs[k] = _build(sub, v, path) if sub is not None else _coerce(names[k].type, v, path)
    return cls(**kwargs)


def _coerce(ftype, v, path):
    # annotations are strings under postponed evaluation
    ftype = str(ftype)
    if v is None and "None" in ftype:
        return None
    try:
        if ftype.startswith("float"):
            if isinstance(v, bool):
                raise ValueError
            return float(v)
        if ftype.startswith("int"):
            if isinstance(v, bool) or (isinstance(v, float) and not v.is_integer()):
                raise ValueError
            return int(v)
        if ftype == "bool":
            if not isinstance(v, bool):
                raise ValueError
            return v
        if ftype == "str":
            if not isinstance(v, str):
                raise ValueError
            return v
    except (TypeError, ValueError):
        raise ConfigError([f"{path}: expected {ftype}, got {v!r}"]) from None
    return v


_SECTIONS = {
    "model": ModelConfig,
    "train": TrainConfig,
    "align": AlignConfig,
    "eval": EvalConfig,
    "data": DataConfig,
    "slice": SliceConfig,
    "profile": ProfileConfig,
    "seeds": SeedsConfig,
}


def from_dict(raw: dict) -> ExperimentConfig:
    return _build(ExperimentConfig, raw, "")


def loads(text: str) -> ExperimentConfig:
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ConfigError([f"config: not valid YAML ({e})"]) from e
    return from_dict(raw or {})


def load(path) -> ExperimentConfig:
    if not os.path.exists(path):
        raise ConfigError([f"--config: file not found: {path}"])
    with open(path) as f:
        cfg = loads(f.read())
    # relative data paths are taken relative to the config file
    if cfg.data.source == "idx" and not os.path.isabs(cfg.data.path):
        cfg.data.path = os.path.normpath(os.path.join(os.path.dirname(os.path.abspath(path)), cfg.data.path))
    return cfg
