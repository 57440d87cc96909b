import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bnn_align import checkpoint
from bnn_align.bnn import MlpSpec, Prior

from conftest import random_posterior


@settings(max_examples=30, deadline=None)
@given(st.lists(st.integers(1, 6), min_size=2, max_size=4), st.integers(0, 2**32 - 1))
def test_round_trip_is_bit_exact(widths, seed):
    spec = MlpSpec(tuple(widths), "regression", 0.25)
    q = random_posterior(spec, np.random.default_rng(seed))
    buf = checkpoint.dumps(q, Prior(0.05), seed, {"note": "x"})
    q2, prior, s, meta = checkpoint.loads(buf)
    assert q2.spec == spec and s == seed and meta == {"note": "x"}
    assert prior.variance == 0.05
    assert np.array_equal(q2.mean, q.mean) and np.array_equal(q2.std, q.std)
    assert checkpoint.dumps(q2, prior, s, meta) == buf


def test_layout(small_spec, rng):
    q = random_posterior(small_spec, rng)
    buf = checkpoint.dumps(q, Prior(1.0), 3)
    assert buf[:8] == checkpoint.MAGIC
    (hlen,) = struct.unpack("<Q", buf[8:16])
    body = np.frombuffer(buf[16 + hlen:], dtype="<f8")
    assert np.array_equal(body[: small_spec.n_params], q.mean)
    assert np.array_equal(body[small_spec.n_params:], q.std)


def test_file_round_trip(tmp_path, small_spec, rng):
    q = random_posterior(small_spec, rng)
    checkpoint.save(tmp_path / "q.bin", q, Prior(0.1), 7)
    q2, _, seed, _ = checkpoint.load(tmp_path / "q.bin")
    assert seed == 7 and np.array_equal(q2.mean, q.mean)


def test_corruption_detected(small_spec, rng):
    buf = checkpoint.dumps(random_posterior(small_spec, rng), Prior(1.0), 0)
    with pytest.raises(checkpoint.CheckpointError):
        checkpoint.loads(b"NOTAPOST" + buf[8:])
    with pytest.raises(checkpoint.CheckpointError):
        checkpoint.loads(buf[:12])
    with pytest.raises(checkpoint.CheckpointError):
        checkpoint.loads(buf[:-8])
    (hlen,) = struct.unpack("<Q", buf[8:16])
    with pytest.raises(checkpoint.CheckpointError):
        checkpoint.loads(buf[:16] + b"{" * hlen + buf[16 + hlen:])
