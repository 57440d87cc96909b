"""Stochastic variational inference for mean-field Gaussian posteriors.

Tempering. For a target ``(p(Y|theta) p(theta))^(1/T)`` the ELBO is, up to the
positive factor ``1/T`` that does not move its optimum,

    E_q[log p(Y|theta)] - KL(q || prior) - (1 - T) * H(q)

which is the ordinary ELBO at ``T = 1`` and sharpens ``q`` for ``T < 1``.
This is the quantity estimated, differentiated and maximized here; see
:class:`ElboEstimate`.

Stds are optimized through ``std = softplus(rho)``.
"""

from __future__ import annotations

import csv
import logging
import math
import time
from dataclasses import dataclass

import numpy as np

from .bnn import GaussianPosterior, MlpSpec, Prior, loglik_and_grad, log_likelihood, sample_params, unpack
from .data import Dataset

log = logging.getLogger(__name__)

LOG_2PI_E = math.log(2.0 * math.pi) + 1.0


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class TrainConfig:
    # full-scale MNIST MLP settings; desk runs override them (configs/)
    batch_size: int = 500
    epochs: int = 1000
    learning_rate: float = 1e-6
    momentum: float = 0.9
    n_mc_train: int = 1
    temperature: float = 1.0
    prior_var: float = 0.01
    std_init: float = 0.01
    seed: int = 0

    def validate(self, n_data: int | None = None):
        for name in ("batch_size", "epochs", "n_mc_train"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        for name in ("learning_rate", "temperature", "prior_var", "std_init"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if not 0 <= self.momentum < 1:
            raise ValueError("momentum must be in [0, 1)")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if n_data is not None and self.batch_size > n_data:
            raise ValueError(f"batch_size {self.batch_size} exceeds dataset size {n_data}")


@dataclass
class ElboEstimate:
    """``elbo = expected_loglik - kl - (1 - temperature) * entropy``."""

    elbo: float
    expected_loglik: float
    kl: float
    entropy: float
    temperature: float = 1.0


def softplus(x):
    return np.logaddexp(0.0, x)


def softplus_inv(y):
    y = np.asarray(y, dtype=float)
    return y + np.log(-np.expm1(-y))


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def kl_gaussians(q: GaussianPosterior, prior: Prior) -> float:
    """KL(q || N(0, prior.variance I)) in closed form, summed over parameters."""
    a2 = prior.variance
    m, s = q.mean, q.std
    return float(0.5 * np.sum((s**2 + m**2) / a2 - 1.0 - np.log(s**2 / a2)))


def entropy(q: GaussianPosterior) -> float:
    return float(np.sum(0.5 * LOG_2PI_E + np.log(q.std)))


def _noise_batch(q: GaussianPosterior, noise) -> np.ndarray:
    noise = np.asarray(noise, dtype=float)
    if noise.ndim == 1:
        noise = noise[None]
    if noise.ndim != 2 or noise.shape[1] != q.spec.n_params or noise.shape[0] < 1:
        raise ValueError(f"noise must have shape (n_mc, {q.spec.n_params})")
    return noise


def _scale(batch: Dataset, n_total: int | None) -> float:
    if len(batch) == 0:
        raise ValueError("empty batch")
    return 1.0 if n_total is None else n_total / len(batch)


def _elbo_terms(q, batch, prior, noise, n_total, temperature, data_weight, with_grad):
    scale = _scale(batch, n_total) * data_weight
    noise = _noise_batch(q, noise)
    lls = []
    g_mean = np.zeros_like(q.mean)
    g_std = np.zeros_like(q.std)
    for eps in noise:
        theta = sample_params(q, eps)
        if with_grad:
            ll, g = loglik_and_grad(q.spec, theta, batch.x, batch.y)
            g_mean += g
            g_std += g * eps
        else:
            ll = log_likelihood(q.spec, theta, batch.x, batch.y)
        lls.append(ll)
    ell = scale * float(np.mean(lls))
    kl = kl_gaussians(q, prior)
    h = entropy(q)
    est = ElboEstimate(ell - kl - (1.0 - temperature) * h, ell, kl, h, temperature)
    if not with_grad:
        return est, None, None
    g_mean *= scale / noise.shape[0]
    g_std *= scale / noise.shape[0]
    g_mean -= q.mean / prior.variance
    # d/ds of -(KL + (1 - T) H) = -(s / a2 - 1 / s) - (1 - T) / s
    g_std -= q.std / prior.variance - temperature / q.std
    return est, g_mean, g_std


def estimate_elbo(
    q: GaussianPosterior,
    batch: Dataset,
    prior: Prior,
    noise,
    n_total: int | None = None,
    temperature: float = 1.0,
) -> ElboEstimate:
    """Minibatch Monte Carlo ELBO estimate.

    The log-likelihood is averaged over the rows of ``noise`` (one
    reparameterized draw each) and scaled by ``n_total / len(batch)``.
    """
    return _elbo_terms(q, batch, prior, noise, n_total, temperature, 1.0, False)[0]


def elbo_gradient(
    q: GaussianPosterior,
    batch: Dataset,
    prior: Prior,
    noise,
    n_total: int | None = None,
    temperature: float = 1.0,
    data_weight: float = 1.0,
):
    """Pathwise gradient of :func:`estimate_elbo` w.r.t. ``(q.mean, q.std)``.

    ``data_weight`` multiplies the likelihood term (0 leaves only the
    regularizer, whose gradient is taken in closed form).
    """
    _, g_mean, g_std = _elbo_terms(q, batch, prior, noise, n_total, temperature, data_weight, True)
    return g_mean, g_std


def init_posterior(spec: MlpSpec, std_init: float, rng: np.random.Generator) -> GaussianPosterior:
    """Means ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)); all stds = ``std_init``."""
    mean = np.empty(spec.n_params)
    for (w, b), (_, fan_in) in zip(unpack(spec, mean), spec.layer_shapes):
        bound = 1.0 / math.sqrt(fan_in)
        w[...] = rng.uniform(-bound, bound, size=w.shape)
        b[...] = rng.uniform(-bound, bound, size=b.shape)
    return GaussianPosterior(spec, mean, np.full(spec.n_params, float(std_init)))


def train_vi(spec: MlpSpec, data: Dataset, cfg: TrainConfig, callback=None):
    """Maximize the tempered ELBO with SGD + momentum.

    Returns the final posterior and a per-epoch trace of dicts (epoch, elbo,
    expected_loglik, kl, wall_ms); the per-epoch values average the minibatch
    estimates of that epoch. Everything random is drawn from streams spawned
    from ``cfg.seed``, so a fixed seed gives bit-identical results.
    """
    n = len(data)
    cfg.validate(n)
    prior = Prior(cfg.prior_var)
    init_ss, shuffle_ss, noise_ss = np.random.SeedSequence(cfg.seed).spawn(3)
    q = init_posterior(spec, cfg.std_init, np.random.default_rng(init_ss))
    shuffle_rng = np.random.default_rng(shuffle_ss)
    noise_rng = np.random.default_rng(noise_ss)

    mean = q.mean.copy()
    rho = softplus_inv(q.std)
    v_mean = np.zeros_like(mean)
    v_rho = np.zeros_like(rho)
    n_batches = n // cfg.batch_size
    trace = []
    for epoch in range(cfg.epochs):
        t0 = time.perf_counter()
        order = shuffle_rng.permutation(n)
        sums = np.zeros(4)
        for k in range(n_batches):
            batch = data.subset(order[k * cfg.batch_size:(k + 1) * cfg.batch_size])
            noise = noise_rng.standard_normal((cfg.n_mc_train, spec.n_params))
            q = _posterior_or_raise(spec, mean, rho, epoch, k)
            est, g_mean, g_std = _elbo_terms(q, batch, prior, noise, n, cfg.temperature, 1.0, True)
            if not (np.isfinite(est.elbo) and np.all(np.isfinite(g_mean)) and np.all(np.isfinite(g_std))):
                raise TrainingDiverged(
                    f"non-finite ELBO or gradient at epoch {epoch}, batch {k} "
                    f"(elbo={est.elbo}, expected_loglik={est.expected_loglik}, kl={est.kl}); "
                    f"try a smaller learning_rate"
                )
            sums += (est.elbo, est.expected_loglik, est.kl, est.entropy)
            v_mean = cfg.momentum * v_mean + g_mean
            v_rho = cfg.momentum * v_rho + g_std * sigmoid(rho)
            mean = mean + cfg.learning_rate * v_mean
            rho = rho + cfg.learning_rate * v_rho
        avg = sums / n_batches
        row = {
            "epoch": epoch,
            "elbo": float(avg[0]),
            "expected_loglik": float(avg[1]),
            "kl": float(avg[2]),
            "wall_ms": (time.perf_counter() - t0) * 1e3,
        }
        trace.append(row)
        if callback is not None:
            callback(row)
        log.debug("epoch %d elbo %.4f", epoch, row["elbo"])
    return _posterior_or_raise(spec, mean, rho, cfg.epochs, n_batches), trace


def _posterior_or_raise(spec, mean, rho, epoch, batch):
    std = softplus(rho)
    # softplus underflows to 0 for rho below about -745
    if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(std)) and np.all(std > 0)):
        raise TrainingDiverged(
            f"posterior left the valid range at epoch {epoch}, batch {batch}; try a smaller learning_rate"
        )
    return GaussianPosterior(spec, mean, std)


def trace_to_csv(trace, path):
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=["epoch", "elbo", "expected_loglik", "kl", "wall_ms"])
        writer.writeheader()
        for row in trace:
            writer.writerow({k: row[k] for k in writer.fieldnames})
