"""Posterior checkpoint files.

Layout (all integers little-endian)::

    bytes 0..7    magic b"BNNPOST1"
    bytes 8..15   uint64 H, length of the header
    next H bytes  UTF-8 JSON header, keys sorted, no whitespace:
                    {"arrays": ["mean", "std"], "dtype": "<f8",
                     "n_params": n, "prior_var": a2, "seed": s,
                     "spec": {...MlpSpec...}, "meta": {...}}
    then          n float64 means, then n float64 stds

The writer is deterministic, so equal posteriors give byte-identical files.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .bnn import GaussianPosterior, MlpSpec, Prior

MAGIC = b"BNNPOST1"


class CheckpointError(ValueError):
    pass


def dumps(q: GaussianPosterior, prior: Prior, seed: int, meta: dict | None = None) -> bytes:
    header = {
        "arrays": ["mean", "std"],
        "dtype": "<f8",
        "n_params": q.spec.n_params,
        "prior_var": float(prior.variance),
        "seed": int(seed),
        "spec": q.spec.to_dict(),
        "meta": meta or {},
    }
    head = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    return b"".join(
        [
            MAGIC,
            struct.pack("<Q", len(head)),
            head,
            q.mean.astype("<f8").tobytes(),
            q.std.astype("<f8").tobytes(),
        ]
    )


def loads(buf: bytes):
    """Inverse of :func:`dumps`: returns ``(posterior, prior, seed, meta)``."""
    if buf[:8] != MAGIC:
        raise CheckpointError("not a posterior checkpoint (bad magic)")
    if len(buf) < 16:
        raise CheckpointError("truncated checkpoint header")
    (hlen,) = struct.unpack("<Q", buf[8:16])
    try:
        header = json.loads(buf[16:16 + hlen].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointError(f"corrupt checkpoint header: {e}") from e
    spec = MlpSpec.from_dict(header["spec"])
    n = header["n_params"]
    if n != spec.n_params:
        raise CheckpointError("parameter count does not match the stored architecture")
    body = buf[16 + hlen:]
    if len(body) != 16 * n:
        raise CheckpointError(f"checkpoint body has {len(body)} bytes, expected {16 * n}")
    arr = np.frombuffer(body, dtype="<f8").astype(float)
    q = GaussianPosterior(spec, arr[:n].copy(), arr[n:].copy())
    return q, Prior(header["prior_var"]), header["seed"], header.get("meta", {})


def save(path, q: GaussianPosterior, prior: Prior, seed: int, meta: dict | None = None):
    with open(path, "wb") as f:
        f.write(dumps(q, prior, seed, meta))


def load(path):
    with open(path, "rb") as f:
        return loads(f.read())
