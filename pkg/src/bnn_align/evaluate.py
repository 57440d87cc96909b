"""Marginal predictive likelihood, barriers along a path, accuracy and 2-D slices.

``L(q) = sum_i log E_q[p(y_i | theta, x_i)]`` is estimated with ``n_mc``
reparameterized draws and a max-shifted log-mean-exp. Barriers are reported
as a *loss* barrier in nats:

    barrier = max_tau [ (1 - tau) L(q0) + tau L(q1) - L(q_tau) ]

so a dip of the predictive log-likelihood along the path is positive, and a
path whose likelihood never falls below the chord (the mixture path, by
concavity of log) has barrier 0.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.special import softmax

from .bnn import (
    GaussianPosterior,
    MlpSpec,
    Prior,
    forward,
    log_posterior_unnorm,
    pointwise_loglik_from_outputs,
    sample_params,
)
from .data import Dataset
from .interp import geodesic, log_mean_exp, mix_log_densities, sample_logliks

GEODESIC = "geodesic"
MIXTURE = "mixture"


def mc_noise(n_params: int, n_mc: int, seed: int) -> np.ndarray:
    if n_mc < 1:
        raise ValueError("n_mc must be >= 1")
    return np.random.default_rng(seed).standard_normal((n_mc, n_params))


def pointwise_predictive(q: GaussianPosterior, data: Dataset, noise) -> np.ndarray:
    """log of the MC predictive density at every data point."""
    return log_mean_exp(sample_logliks(q, data.x, data.y, noise), axis=0)


def predictive_loglik(q: GaussianPosterior, data: Dataset, n_mc: int = 128, seed: int = 0) -> float:
    return float(np.sum(pointwise_predictive(q, data, mc_noise(q.spec.n_params, n_mc, seed))))


def predictive_loglik_stderr(q: GaussianPosterior, data: Dataset, n_mc: int = 128, seed: int = 0) -> float:
    """Delta-method standard error of :func:`predictive_loglik`.

    Per point, ``Var[log mean(w)] ~ Var(w) / (n_mc mean(w)^2)``; points are
    independent given the posterior draws only approximately, so this is a
    scale for the MC noise, not an exact bound.
    """
    ll = sample_logliks(q, data.x, data.y, mc_noise(q.spec.n_params, n_mc, seed))
    w = np.exp(ll - ll.max(axis=0, keepdims=True))
    mean = w.mean(axis=0)
    var = w.var(axis=0, ddof=1) if n_mc > 1 else np.zeros_like(mean)
    return float(np.sqrt(np.sum(var / (n_mc * mean**2))))


@dataclass
class BarrierReport:
    taus: np.ndarray
    loglik_per_tau: np.ndarray
    loglik_0: float
    loglik_1: float
    barrier: float
    split: str
    n_points: int
    path: str = GEODESIC
    accuracy_per_tau: np.ndarray | None = None
    extra: dict = field(default_factory=dict)

    @property
    def barrier_per_datum(self) -> float:
        return self.barrier / self.n_points

    def gaps(self) -> np.ndarray:
        """Chord minus path log-likelihood at every tau."""
        chord = (1.0 - self.taus) * self.loglik_0 + self.taus * self.loglik_1
        return chord - self.loglik_per_tau

    def rows(self):
        for k, tau in enumerate(self.taus):
            row = {
                "split": self.split,
                "tau": float(tau),
                "loglik": float(self.loglik_per_tau[k]),
                "loglik_mean": float(self.loglik_per_tau[k]) / self.n_points,
            }
            row["acc"] = "" if self.accuracy_per_tau is None else float(self.accuracy_per_tau[k])
            yield row

    def to_csv(self, path, append=False):
        with open(path, "a" if append else "w", newline="") as f:
            w = csv.DictWriter(f, fieldnames=CSV_FIELDS)
            if not append:
                w.writeheader()
            for row in self.rows():
                w.writerow({k: _fmt(v) for k, v in row.items()})


CSV_FIELDS = ["split", "tau", "loglik", "loglik_mean", "acc"]


def _fmt(v):
    return repr(v) if isinstance(v, float) else v


def _path_scores(q, data, noise):
    """Pointwise log predictive and (classification) accuracy from one pass per draw."""
    noise = np.atleast_2d(noise)
    ll = np.empty((noise.shape[0], len(data)))
    probs = np.zeros((len(data), q.spec.num_classes)) if q.spec.task == "classification" else None
    for s, eps in enumerate(noise):
        out = forward(q.spec, sample_params(q, eps), data.x)
        ll[s] = pointwise_loglik_from_outputs(q.spec, out, data.y)
        if probs is not None:
            probs += softmax(out, axis=1)
    acc = None if probs is None else float(np.mean(np.argmax(probs, axis=1) == data.y))
    return log_mean_exp(ll, axis=0), acc


def barrier(
    q0: GaussianPosterior,
    q1: GaussianPosterior,
    data: Dataset,
    n_taus: int = 25,
    n_mc: int = 128,
    seed: int = 0,
    path: str = GEODESIC,
) -> BarrierReport:
    """Evaluate L on an even tau grid (endpoints included) along a path.

    The same ``n_mc`` noise draws are reused at every tau.
    """
    if n_taus < 2:
        raise ValueError("n_taus must be >= 2")
    if q0.spec.widths != q1.spec.widths:
        raise ValueError("posteriors have different architectures")
    taus = np.linspace(0.0, 1.0, n_taus)
    noise = mc_noise(q0.spec.n_params, n_mc, seed)
    classification = q0.spec.task == "classification"
    lls = np.empty(n_taus)
    accs = np.empty(n_taus) if classification else None
    if path == GEODESIC:
        for k, tau in enumerate(taus):
            pw, acc = _path_scores(geodesic(q0, q1, float(tau)), data, noise)
            lls[k] = np.sum(pw)
            if classification:
                accs[k] = acc
    elif path == MIXTURE:
        lp0 = pointwise_predictive(q0, data, noise)
        lp1 = pointwise_predictive(q1, data, noise)
        if classification:
            p0 = _mc_probs(q0, data, noise)
            p1 = _mc_probs(q1, data, noise)
        for k, tau in enumerate(taus):
            lls[k] = np.sum(mix_log_densities(lp0, lp1, float(tau)))
            if classification:
                probs = (1.0 - tau) * p0 + tau * p1
                accs[k] = float(np.mean(np.argmax(probs, axis=1) == data.y))
    else:
        raise ValueError(f"unknown path {path!r}")
    l0, l1 = float(lls[0]), float(lls[-1])
    chord = (1.0 - taus) * l0 + taus * l1
    b = float(np.max(chord - lls))
    return BarrierReport(taus, lls, l0, l1, b, data.split, len(data), path, accs)


def _mc_probs(q, data, noise):
    probs = np.zeros((len(data), q.spec.num_classes))
    for eps in np.atleast_2d(noise):
        probs += softmax(forward(q.spec, sample_params(q, eps), data.x), axis=1)
    return probs / np.atleast_2d(noise).shape[0]


def _accuracy_from_noise(q, data, noise):
    return float(np.mean(np.argmax(_mc_probs(q, data, noise), axis=1) == data.y))


def accuracy(q: GaussianPosterior, data: Dataset, n_mc: int = 128, seed: int = 0) -> float:
    """Accuracy of the argmax of MC-averaged class probabilities."""
    if q.spec.task != "classification":
        raise ValueError("accuracy is only defined for classification")
    return _accuracy_from_noise(q, data, mc_noise(q.spec.n_params, n_mc, seed))


@dataclass
class SliceGrid:
    a: np.ndarray
    b: np.ndarray
    values: np.ndarray  # values[i, j] at (a[i], b[j])

    def rows(self):
        for i, av in enumerate(self.a):
            for j, bv in enumerate(self.b):
                yield float(av), float(bv), float(self.values[i, j])

    def to_csv(self, path):
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["a", "b", "logpost"])
            for a, b, v in self.rows():
                w.writerow([repr(a), repr(b), repr(v)])


@dataclass
class GridConfig:
    a_min: float = -0.5
    a_max: float = 1.5
    b_min: float = -0.5
    b_max: float = 1.5
    resolution: int = 21


def _axis(lo, hi, n):
    ax = np.linspace(lo, hi, n)
    # snap grid values that are 0 or 1 up to rounding, so anchors are hit exactly
    for target in (0.0, 1.0):
        ax[np.isclose(ax, target, rtol=0, atol=1e-12)] = target
    return ax


def plane_point(theta_a, theta_b, theta_c, a, b):
    return a * theta_a + b * theta_b + (1.0 - a - b) * theta_c


def slice_logposterior(
    spec: MlpSpec,
    data: Dataset,
    prior: Prior,
    temperature: float,
    theta_a,
    theta_b,
    theta_c,
    grid: GridConfig = GridConfig(),
) -> SliceGrid:
    """Tempered log-posterior on the plane through three parameter vectors.

    Grid point ``(a, b)`` is ``a theta_a + b theta_b + (1 - a - b) theta_c``,
    so the anchors sit at (1, 0), (0, 1) and (0, 0).
    """
    anchors = [np.asarray(t, dtype=float) for t in (theta_a, theta_b, theta_c)]
    for i in range(3):
        for j in range(i + 1, 3):
            if np.linalg.norm(anchors[i] - anchors[j]) <= 1e-9:
                raise ValueError("slice anchors are degenerate (two coincide)")
    if grid.resolution < 2:
        raise ValueError("grid resolution must be >= 2")
    a_ax = _axis(grid.a_min, grid.a_max, grid.resolution)
    b_ax = _axis(grid.b_min, grid.b_max, grid.resolution)
    values = np.empty((a_ax.size, b_ax.size))
    for i, a in enumerate(a_ax):
        for j, b in enumerate(b_ax):
            theta = _anchor_or_plane(anchors, a, b)
            values[i, j] = log_posterior_unnorm(spec, theta, data.x, data.y, prior, temperature)
    return SliceGrid(a_ax, b_ax, values)


def _anchor_or_plane(anchors, a, b):
    # exact anchors at the three corners avoid 0 * x rounding
    if (a, b) == (1.0, 0.0):
        return anchors[0]
    if (a, b) == (0.0, 1.0):
        return anchors[1]
    if (a, b) == (0.0, 0.0):
        return anchors[2]
    return plane_point(*anchors, a, b)
