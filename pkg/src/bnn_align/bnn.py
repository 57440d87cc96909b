"""MLPs with diagonal-Gaussian posteriors over their parameters.

All parameter-shaped quantities (a parameter sample, a posterior mean, a
posterior std, reparameterization noise, gradients) are flat float64 vectors
of length ``spec.n_params``. The flattening order is fixed: layer by layer,
each layer contributing its weight matrix ``W`` (shape ``D_out x D_in``,
row-major) followed by its bias ``b``. :func:`unpack` returns views into the
flat vector in that order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import log_softmax, softmax

LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class MlpSpec:
    """Dense ReLU network ``widths[0] -> ... -> widths[-1]``.

    ``task`` is ``"classification"`` (logit head, categorical likelihood,
    ``widths[-1]`` classes) or ``"regression"`` (Gaussian likelihood with a
    fixed ``noise_std``).
    """

    widths: tuple[int, ...]
    task: str = "classification"
    noise_std: float = 1.0
    activation: str = "relu"

    def __post_init__(self):
        object.__setattr__(self, "widths", tuple(int(w) for w in self.widths))
        if len(self.widths) < 2:
            raise ValueError("an MLP needs at least an input and an output width")
        if any(w < 1 for w in self.widths):
            raise ValueError(f"all widths must be >= 1, got {self.widths}")
        if self.task not in ("classification", "regression"):
            raise ValueError(f"unknown task {self.task!r}")
        if self.activation != "relu":
            raise ValueError(f"unsupported activation {self.activation!r}")
        if self.task == "regression" and not self.noise_std > 0:
            raise ValueError("regression noise_std must be > 0")

    @property
    def n_layers(self) -> int:
        return len(self.widths) - 1

    @property
    def hidden_widths(self) -> tuple[int, ...]:
        return self.widths[1:-1]

    @property
    def num_classes(self) -> int:
        return self.widths[-1]

    @property
    def layer_shapes(self) -> list[tuple[int, int]]:
        return [(self.widths[k + 1], self.widths[k]) for k in range(self.n_layers)]

    @property
    def n_params(self) -> int:
        return sum(o * i + o for o, i in self.layer_shapes)

    def offsets(self) -> list[tuple[int, int, int]]:
        """(weight start, bias start, layer end) per layer in the flat vector."""
        out, pos = [], 0
        for o, i in self.layer_shapes:
            out.append((pos, pos + o * i, pos + o * i + o))
            pos += o * i + o
        return out

    def to_dict(self) -> dict:
        return {
            "widths": list(self.widths),
            "task": self.task,
            "noise_std": float(self.noise_std),
            "activation": self.activation,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MlpSpec":
        return cls(
            widths=tuple(d["widths"]),
            task=d.get("task", "classification"),
            noise_std=float(d.get("noise_std", 1.0)),
            activation=d.get("activation", "relu"),
        )


@dataclass(frozen=True)
class Prior:
    """Isotropic Gaussian prior N(0, variance * I)."""

    variance: float = 0.01

    def __post_init__(self):
        if not self.variance > 0:
            raise ValueError("prior variance must be > 0")


def unpack(spec: MlpSpec, vec: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
    """Per-layer ``(W, b)`` views into a flat parameter vector."""
    vec = np.asarray(vec)
    if vec.shape != (spec.n_params,):
        raise ValueError(f"expected a flat vector of {spec.n_params} parameters, got shape {vec.shape}")
    layers = []
    for (ws, bs, end), (o, i) in zip(spec.offsets(), spec.layer_shapes):
        layers.append((vec[ws:bs].reshape(o, i), vec[bs:end]))
    return layers


def pack(spec: MlpSpec, layers) -> np.ndarray:
    vec = np.concatenate([np.concatenate([np.ravel(w), np.ravel(b)]) for w, b in layers])
    if vec.shape != (spec.n_params,):
        raise ValueError("layer shapes do not match the spec")
    return vec.astype(float)


@dataclass
class GaussianPosterior:
    """Mean-field Gaussian ``prod_i N(mean_i, std_i^2)`` over the flat parameters."""

    spec: MlpSpec
    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=float)
        self.std = np.asarray(self.std, dtype=float)
        n = self.spec.n_params
        if self.mean.shape != (n,) or self.std.shape != (n,):
            raise ValueError(f"mean/std must both have shape ({n},)")
        if not (np.all(np.isfinite(self.std)) and np.all(self.std > 0)):
            raise ValueError("posterior stds must be finite and strictly positive")
        if not np.all(np.isfinite(self.mean)):
            raise ValueError("posterior means must be finite")

    def layers(self):
        """Per-layer ``(W_mean, b_mean, W_std, b_std)`` views."""
        return [
            (wm, bm, ws, bs)
            for (wm, bm), (ws, bs) in zip(unpack(self.spec, self.mean), unpack(self.spec, self.std))
        ]

    def copy(self) -> "GaussianPosterior":
        return GaussianPosterior(self.spec, self.mean.copy(), self.std.copy())


def sample_params(q: GaussianPosterior, noise: np.ndarray) -> np.ndarray:
    """Reparameterized draw ``mean + std * noise``; ``noise`` may carry leading sample axes."""
    noise = np.asarray(noise, dtype=float)
    if noise.shape[-1:] != q.mean.shape:
        raise ValueError(f"noise shape {noise.shape} does not match {q.mean.shape}")
    return q.mean + q.std * noise


def forward(spec: MlpSpec, theta: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Network outputs (logits for classification) for a batch ``x`` of shape (N, D_in)."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[1] != spec.widths[0]:
        raise ValueError(f"input must have shape (N, {spec.widths[0]}), got {x.shape}")
    layers = unpack(spec, theta)
    h = x
    for w, b in layers[:-1]:
        h = np.maximum(h @ w.T + b, 0.0)
    w, b = layers[-1]
    return h @ w.T + b


def _check_targets(spec: MlpSpec, out: np.ndarray, y: np.ndarray) -> np.ndarray:
    if spec.task == "classification":
        y = np.asarray(y)
        if y.shape != (out.shape[0],):
            raise ValueError(f"labels must have shape ({out.shape[0]},), got {y.shape}")
        if y.size and (y.min() < 0 or y.max() >= spec.num_classes):
            raise ValueError(f"label out of range [0, {spec.num_classes})")
        return y.astype(np.int64)
    y = np.asarray(y, dtype=float)
    if y.ndim == 1:
        y = y[:, None]
    if y.shape != out.shape:
        raise ValueError(f"targets must have shape {out.shape}, got {y.shape}")
    return y


def pointwise_loglik_from_outputs(spec: MlpSpec, out: np.ndarray, y: np.ndarray) -> np.ndarray:
    """log p(y_i | outputs_i) for each row; ``out`` may carry leading sample axes."""
    if spec.task == "classification":
        y = np.asarray(y, dtype=np.int64)
        logp = log_softmax(out, axis=-1)
        return np.take_along_axis(logp, np.broadcast_to(y[:, None], out.shape[:-1] + (1,)), axis=-1)[..., 0]
    y = np.asarray(y, dtype=float)
    if y.ndim == 1:
        y = y[:, None]
    s = spec.noise_std
    resid = (y - out) / s
    return np.sum(-0.5 * LOG_2PI - math.log(s) - 0.5 * resid**2, axis=-1)


def log_likelihood(spec: MlpSpec, theta: np.ndarray, x: np.ndarray, y: np.ndarray) -> float:
    out = forward(spec, theta, x)
    y = _check_targets(spec, out, y)
    return float(np.sum(pointwise_loglik_from_outputs(spec, out, y)))


def loglik_and_grad(spec: MlpSpec, theta: np.ndarray, x: np.ndarray, y: np.ndarray):
    """Summed log-likelihood and its gradient w.r.t. the flat parameters (backprop)."""
    x = np.asarray(x, dtype=float)
    layers = unpack(spec, theta)
    acts = [x]
    pre = []
    h = x
    for w, b in layers[:-1]:
        z = h @ w.T + b
        pre.append(z)
        h = np.maximum(z, 0.0)
        acts.append(h)
    w, b = layers[-1]
    out = h @ w.T + b
    y = _check_targets(spec, out, y)
    ll = float(np.sum(pointwise_loglik_from_outputs(spec, out, y)))

    if spec.task == "classification":
        delta = -softmax(out, axis=1)
        delta[np.arange(out.shape[0]), y] += 1.0
    else:
        delta = (y - out) / spec.noise_std**2

    grad = np.empty(spec.n_params)
    glayers = unpack(spec, grad)
    for k in range(spec.n_layers - 1, -1, -1):
        gw, gb = glayers[k]
        gw[...] = delta.T @ acts[k]
        gb[...] = delta.sum(axis=0)
        if k > 0:
            delta = (delta @ layers[k][0]) * (pre[k - 1] > 0)
    return ll, grad


def log_prior(theta: np.ndarray, prior: Prior) -> float:
    theta = np.asarray(theta, dtype=float)
    a2 = prior.variance
    return float(-0.5 * theta.size * (LOG_2PI + math.log(a2)) - 0.5 * np.dot(theta, theta) / a2)


def log_posterior_unnorm(spec: MlpSpec, theta, x, y, prior: Prior, temperature: float = 1.0) -> float:
    """Tempered unnormalized log-posterior ``(log p(Y|theta) + log p(theta)) / T``."""
    if not temperature > 0:
        raise ValueError("temperature must be > 0")
    return (log_likelihood(spec, theta, x, y) + log_prior(theta, prior)) / temperature
