import numpy as np
import pytest

from bnn_align.bnn import GaussianPosterior, MlpSpec
from bnn_align.data import Dataset

# filled by tests/test_acceptance.py, printed once at the end of the session
ACCEPTANCE = {}


def random_posterior(spec, rng, mean_scale=1.0, std_lo=0.1, std_hi=1.0):
    return GaussianPosterior(
        spec,
        mean_scale * rng.standard_normal(spec.n_params),
        rng.uniform(std_lo, std_hi, spec.n_params),
    )


def random_classification(n, d_in, n_classes, rng, split="test"):
    return Dataset(rng.standard_normal((n, d_in)), rng.integers(0, n_classes, n), "classification", n_classes, split)


def random_regression(n, d_in, d_out, rng, split="test"):
    return Dataset(rng.standard_normal((n, d_in)), rng.standard_normal((n, d_out)), "regression", None, split)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_spec():
    return MlpSpec((5, 4, 3, 3))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[k])
