"""Paths between two diagonal-Gaussian posteriors.

For commuting (here: diagonal) covariances the optimal transport map between
N(m0, diag(s0^2)) and N(m1, diag(s1^2)) is ``x -> m1 + (s1 / s0) (x - m0)``,
so the displacement interpolation stays Gaussian with mean and std both
linear in tau.
"""

from __future__ import annotations

import numpy as np

from .bnn import GaussianPosterior, forward, pointwise_loglik_from_outputs, sample_params


def _check_tau(tau):
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"tau must lie in [0, 1], got {tau}")


def _check_pair(q0, q1):
    if q0.spec.widths != q1.spec.widths:
        raise ValueError("posteriors have different architectures")


def geodesic(q0: GaussianPosterior, q1: GaussianPosterior, tau: float) -> GaussianPosterior:
    _check_tau(tau)
    _check_pair(q0, q1)
    if tau == 0.0:
        return q0.copy()
    if tau == 1.0:
        return q1.copy()
    return GaussianPosterior(
        q0.spec,
        (1.0 - tau) * q0.mean + tau * q1.mean,
        (1.0 - tau) * q0.std + tau * q1.std,
    )


def w2_squared(q0: GaussianPosterior, q1: GaussianPosterior) -> float:
    _check_pair(q0, q1)
    return float(np.sum((q0.mean - q1.mean) ** 2) + np.sum((q0.std - q1.std) ** 2))


def sample_logliks(q: GaussianPosterior, x, y, noise) -> np.ndarray:
    """log p(y_i | theta_s, x_i) for every noise row ``s``: shape (n_mc, N)."""
    noise = np.atleast_2d(noise)
    return np.stack([pointwise_loglik_from_outputs(q.spec, forward(q.spec, sample_params(q, eps), x), y) for eps in noise])


def log_mean_exp(a, axis=0):
    a = np.asarray(a, dtype=float)
    m = np.max(a, axis=axis, keepdims=True)
    if np.any(np.isneginf(m)):
        raise FloatingPointError("every Monte Carlo sample likelihood underflowed for some point")
    return np.squeeze(m, axis=axis) + np.log(np.mean(np.exp(a - m), axis=axis))


def mixture_predictive(q0, q1, tau, x, y, noise) -> np.ndarray:
    """Per-point log predictive density of the mixture ``(1 - tau) q0 + tau q1``.

    Each component uses the Monte Carlo predictive built from the same noise
    rows.
    """
    _check_tau(tau)
    _check_pair(q0, q1)
    lp0 = log_mean_exp(sample_logliks(q0, x, y, noise))
    lp1 = log_mean_exp(sample_logliks(q1, x, y, noise))
    return mix_log_densities(lp0, lp1, tau)


def mix_log_densities(lp0, lp1, tau):
    if tau == 0.0:
        return np.array(lp0, dtype=float)
    if tau == 1.0:
        return np.array(lp1, dtype=float)
    return np.logaddexp(np.log1p(-tau) + lp0, np.log(tau) + lp1)
