"""Datasets: IDX (MNIST family) files, a Snelson-style 1-D regression toy, splits."""

from __future__ import annotations

import gzip
import os
import struct
from dataclasses import dataclass, replace

import numpy as np


class IdxError(ValueError):
    pass


class BadMagic(IdxError):
    pass


class UnsupportedType(IdxError):
    pass


class TruncatedPayload(IdxError):
    pass


UBYTE = 0x08


@dataclass
class Dataset:
    """Inputs ``x`` (N, D_in) with integer labels (N,) or real targets (N, D_out)."""

    x: np.ndarray
    y: np.ndarray
    task: str = "classification"
    num_classes: int | None = None
    split: str = "train"

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        if self.x.ndim != 2:
            raise ValueError("x must be a 2-D array")
        if self.task == "classification":
            self.y = np.asarray(self.y, dtype=np.int64)
            if self.num_classes is None:
                self.num_classes = int(self.y.max()) + 1 if self.y.size else 0
        elif self.task == "regression":
            self.y = np.asarray(self.y, dtype=float)
            if self.y.ndim == 1:
                self.y = self.y[:, None]
        else:
            raise ValueError(f"unknown task {self.task!r}")
        self.check()

    def check(self):
        if self.x.shape[0] != self.y.shape[0]:
            raise ValueError(f"{self.x.shape[0]} inputs but {self.y.shape[0]} targets")
        if not np.all(np.isfinite(self.x)):
            raise ValueError("non-finite features")
        if self.task == "classification" and self.y.size:
            if self.y.min() < 0 or self.y.max() >= self.num_classes:
                raise ValueError(f"labels outside [0, {self.num_classes})")

    def __len__(self):
        return self.x.shape[0]

    def subset(self, idx) -> "Dataset":
        return replace(self, x=self.x[idx], y=self.y[idx])


def parse_idx(buf: bytes) -> np.ndarray:
    """Decode an IDX byte string (unsigned-byte payloads only)."""
    buf = bytes(buf)
    if len(buf) < 4:
        raise TruncatedPayload("IDX header shorter than 4 bytes")
    if buf[0] != 0 or buf[1] != 0:
        raise BadMagic(f"IDX magic must start with two zero bytes, got {buf[:2].hex()}")
    if buf[2] != UBYTE:
        raise UnsupportedType(f"IDX type code 0x{buf[2]:02x} is not supported (only 0x08)")
    rank = buf[3]
    header = 4 + 4 * rank
    if len(buf) < header:
        raise TruncatedPayload(f"IDX header declares rank {rank} but holds {len(buf) - 4} dimension bytes")
    dims = struct.unpack(f">{rank}I", buf[4:header])
    size = int(np.prod(dims, dtype=np.int64))
    if len(buf) - header < size:
        raise TruncatedPayload(f"IDX payload has {len(buf) - header} bytes, dims {dims} need {size}")
    if len(buf) - header > size:
        raise IdxError(f"IDX payload has {len(buf) - header - size} trailing bytes")
    return np.frombuffer(buf, dtype=np.uint8, count=size, offset=header).reshape(dims)


def write_idx(arr: np.ndarray) -> bytes:
    arr = np.asarray(arr)
    if arr.dtype != np.uint8:
        raise UnsupportedType("only uint8 tensors can be written")
    if arr.ndim > 255:
        raise IdxError("rank too large for IDX")
    head = bytes([0, 0, UBYTE, arr.ndim]) + struct.pack(f">{arr.ndim}I", *arr.shape)
    return head + np.ascontiguousarray(arr).tobytes()


def read_idx_file(path) -> np.ndarray:
    with open(path, "rb") as f:
        raw = f.read()
    if str(path).endswith(".gz") or raw[:2] == b"\x1f\x8b":
        raw = gzip.decompress(raw)
    return parse_idx(raw)


MNIST_FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}


def find_mnist_files(directory) -> dict:
    """Locate the four standard MNIST-family files (optionally ``.gz``) in a directory."""
    out = {}
    for split, names in MNIST_FILES.items():
        paths = []
        for name in names:
            for cand in (name, name + ".gz"):
                p = os.path.join(directory, cand)
                if os.path.exists(p):
                    paths.append(p)
                    break
            else:
                raise FileNotFoundError(os.path.join(directory, name))
        out[split] = tuple(paths)
    return out


def load_idx_pair(images_path, labels_path, split="train") -> Dataset:
    images = read_idx_file(images_path)
    labels = read_idx_file(labels_path)
    if images.shape[0] != labels.shape[0]:
        raise IdxError(f"{images.shape[0]} images but {labels.shape[0]} labels")
    # raw 0..255 pixel values; normalize_split(pixels=True) rescales them
    x = images.reshape(images.shape[0], -1).astype(float)
    return Dataset(x, labels, "classification", 10, split)


def load_mnist(directory):
    files = find_mnist_files(directory)
    train = load_idx_pair(*files["train"], split="train")
    test = load_idx_pair(*files["test"], split="test")
    return train, test


def snelson_mean(x):
    """Mean function of the toy regression task."""
    x = np.asarray(x, dtype=float)
    return np.sin(3.0 * x) + 0.3 * np.cos(9.0 * x) + 0.5 * np.sin(0.7 * x)


def synth_regression(n: int, noise_std: float = 0.2, seed: int = 0, split: str = "train") -> Dataset:
    """1-D regression with inputs on two intervals separated by a gap.

    x ~ U([-3, -0.75] u [0.75, 3]) (each interval picked with probability
    1/2), y = snelson_mean(x) + N(0, noise_std^2).
    """
    if n < 2:
        raise ValueError("need at least 2 points")
    if noise_std < 0:
        raise ValueError("noise_std must be >= 0")
    rng = np.random.default_rng(seed)
    side = rng.integers(0, 2, size=n)
    u = rng.uniform(0.75, 3.0, size=n)
    x = np.where(side == 0, -u, u)
    y = snelson_mean(x) + noise_std * rng.standard_normal(n)
    return Dataset(x[:, None], y[:, None], "regression", None, split)


def balanced_subset(labels, size: int, rng: np.random.Generator) -> np.ndarray:
    """Sorted indices of a class-balanced subset (remainders go to the first classes)."""
    labels = np.asarray(labels)
    classes = np.unique(labels)
    base, extra = divmod(size, classes.size)
    picked = []
    for k, c in enumerate(classes):
        idx = np.flatnonzero(labels == c)
        want = base + (1 if k < extra else 0)
        if want > idx.size:
            raise ValueError(f"class {c} has only {idx.size} examples, {want} requested")
        picked.append(rng.choice(idx, size=want, replace=False))
    return np.sort(np.concatenate(picked))


def _pick(data: Dataset, size, rng) -> Dataset:
    if size is None or size == len(data):
        return data
    if size > len(data):
        raise ValueError(f"subset of {size} requested from {len(data)} examples")
    if data.task == "classification":
        idx = balanced_subset(data.y, size, rng)
    else:
        idx = np.sort(rng.choice(len(data), size=size, replace=False))
    return data.subset(idx)


def normalize_split(train: Dataset, test: Dataset, train_size=None, test_size=None, seed: int = 0, pixels=False):
    """Seeded (class-balanced) subsets, standardized with train statistics.

    With ``pixels=True`` features are first divided by 255. Standardization
    uses one scalar mean and std over all training features, so the
    returned train features have mean 0 and std 1 overall.
    """
    rng = np.random.default_rng(seed)
    train = _pick(train, train_size, rng)
    test = _pick(test, test_size, rng)
    xtr, xte = train.x, test.x
    if pixels:
        xtr, xte = xtr / 255.0, xte / 255.0
    mu = xtr.mean()
    sd = xtr.std()
    if not sd > 0:
        sd = 1.0
    train = replace(train, x=(xtr - mu) / sd, split="train")
    test = replace(test, x=(xte - mu) / sd, split="test")
    return train, test


def split_pool(pool: Dataset, train_size: int, test_size: int, seed: int = 0):
    """Disjoint class-balanced train/test subsets of one labelled pool."""
    if train_size + test_size > len(pool):
        raise ValueError(f"{train_size}+{test_size} examples requested from a pool of {len(pool)}")
    rng = np.random.default_rng(seed)
    test_idx = balanced_subset(pool.y, test_size, rng)
    rest = np.setdiff1d(np.arange(len(pool)), test_idx)
    train_idx = rest[balanced_subset(pool.y[rest], train_size, rng)]
    return replace(pool.subset(train_idx), split="train"), replace(pool.subset(test_idx), split="test")


def write_mnist_dir(train: Dataset, test: Dataset, directory, side: int = 28):
    """Write raw-pixel datasets as the four standard (uncompressed) IDX files."""
    os.makedirs(directory, exist_ok=True)
    for split, data in (("train", train), ("test", test)):
        pixels = np.rint(data.x)
        if pixels.min() < 0 or pixels.max() > 255 or not np.array_equal(pixels, data.x):
            raise ValueError("write_mnist_dir expects raw integer pixels in [0, 255]")
        images = pixels.astype(np.uint8).reshape(len(data), side, side)
        img_name, lbl_name = MNIST_FILES[split]
        with open(os.path.join(directory, img_name), "wb") as f:
            f.write(write_idx(images))
        with open(os.path.join(directory, lbl_name), "wb") as f:
            f.write(write_idx(data.y.astype(np.uint8)))
