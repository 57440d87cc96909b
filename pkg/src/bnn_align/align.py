"""Permutation alignment of two posteriors (or two point estimates) of one MLP.

A :class:`PermutationSet` holds one index array per hidden layer. Applying it
to q1 reorders hidden unit ``i`` of the aligned model to be unit ``perm[i]``
of q1 (rows of ``W_l``, ``b_l``; columns of ``W_{l+1}``); input and output
units are never permuted.

Alignment maximizes, by coordinate ascent over hidden layers, the sum over
layers of ``<M0, M1'> + <S0, S1'>`` (Wasserstein cost; equivalent to
minimizing W2^2 between q0 and the aligned q1) or ``-sum (M0 - M1')^2 / w0``
(KL cost; ``w0`` is q0's variance or std). Fixing all layers but one, the
objective is a linear assignment problem in that layer's permutation.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import lap
from .bnn import GaussianPosterior, MlpSpec, unpack

WASSERSTEIN = "wasserstein"
KL = "kl"


@dataclass
class PermutationSet:
    perms: list

    def __post_init__(self):
        self.perms = [lap._check_perm(np.asarray(p, dtype=np.int64)) for p in self.perms]

    @classmethod
    def identity(cls, spec: MlpSpec) -> "PermutationSet":
        return cls([lap.identity(d) for d in spec.hidden_widths])

    @classmethod
    def random(cls, spec: MlpSpec, rng: np.random.Generator) -> "PermutationSet":
        return cls([rng.permutation(d) for d in spec.hidden_widths])

    def check(self, spec: MlpSpec):
        widths = tuple(p.size for p in self.perms)
        if widths != spec.hidden_widths:
            raise ValueError(f"permutation sizes {widths} do not match hidden widths {spec.hidden_widths}")

    def inverse(self) -> "PermutationSet":
        return PermutationSet([lap.invert(p) for p in self.perms])

    def is_identity(self) -> bool:
        return all(np.array_equal(p, np.arange(p.size)) for p in self.perms)

    def __eq__(self, other):
        return isinstance(other, PermutationSet) and len(self.perms) == len(other.perms) and all(
            np.array_equal(a, b) for a, b in zip(self.perms, other.perms)
        )

    def to_text(self) -> str:
        return "".join(" ".join(str(int(i)) for i in p) + "\n" for p in self.perms)

    @classmethod
    def from_text(cls, text: str) -> "PermutationSet":
        return cls([np.array([int(t) for t in line.split()], dtype=np.int64) for line in text.splitlines() if line.strip()])

    def save(self, path):
        with open(path, "w") as f:
            f.write(self.to_text())

    @classmethod
    def load(cls, path) -> "PermutationSet":
        with open(path) as f:
            return cls.from_text(f.read())


@dataclass
class AlignReport:
    objective_trace: list
    sweeps: int
    converged: bool
    layer_orders: list = field(default_factory=list)
    wall_ms: float = 0.0
    cost: str = WASSERSTEIN

    def to_dict(self) -> dict:
        return {
            "objective_trace": [float(v) for v in self.objective_trace],
            "sweeps": self.sweeps,
            "converged": self.converged,
            "layer_orders": [[int(i) for i in o] for o in self.layer_orders],
            "wall_ms": self.wall_ms,
            "cost": self.cost,
        }


def permute_params(spec: MlpSpec, vec: np.ndarray, perms: PermutationSet) -> np.ndarray:
    """Apply a permutation set to any flat parameter-shaped vector."""
    perms.check(spec)
    out = np.array(vec, dtype=float, copy=True)
    src = unpack(spec, np.asarray(vec, dtype=float))
    dst = unpack(spec, out)
    for k, ((w, b), (w_out, b_out)) in enumerate(zip(src, dst)):
        if k < spec.n_layers - 1:
            w = lap.permute_rows(perms.perms[k], w)
            b_out[...] = lap.permute_rows(perms.perms[k], b)
        if k > 0:
            w = lap.permute_cols(perms.perms[k - 1], w)
        w_out[...] = w
    return out


def pushforward(q: GaussianPosterior, perms: PermutationSet) -> GaussianPosterior:
    return GaussianPosterior(q.spec, permute_params(q.spec, q.mean, perms), permute_params(q.spec, q.std, perms))


def _check_pair(q0: GaussianPosterior, q1: GaussianPosterior):
    if q0.spec.widths != q1.spec.widths:
        raise ValueError(f"architectures differ: {q0.spec.widths} vs {q1.spec.widths}")


def _augmented(w, b, include_bias):
    return np.hstack([w, b[:, None]]) if include_bias else w


def _layer_blocks(spec, vec, perms, l, include_bias):
    """Rows-side block (layer l, columns already aligned by perms[l-1]) and
    columns-side block (layer l+1, rows already aligned by perms[l+1])."""
    layers = unpack(spec, vec)
    w, b = layers[l]
    if l > 0:
        w = lap.permute_cols(perms.perms[l - 1], w)
    rows = _augmented(w, b, include_bias)
    w_next = layers[l + 1][0]
    if l + 1 < spec.n_layers - 1:
        w_next = lap.permute_rows(perms.perms[l + 1], w_next)
    return rows, w_next


def _kl_weight(std, kl_weighting):
    if kl_weighting == "variance":
        return std**2
    if kl_weighting == "std":
        return std
    raise ValueError(f"kl_weighting must be 'variance' or 'std', got {kl_weighting!r}")


def layer_score_matrix(
    q0: GaussianPosterior,
    q1: GaussianPosterior,
    perms: PermutationSet,
    l: int,
    cost: str = WASSERSTEIN,
    include_bias: bool = True,
    kl_weighting: str = "variance",
    use_std: bool = True,
    rows_only: bool = False,
) -> np.ndarray:
    """LAP score matrix for hidden layer ``l`` with all other permutations fixed.

    Entry ``[i, k]`` scores matching unit ``i`` of q0 with unit ``k`` of q1.
    ``rows_only`` drops the outgoing-weight term (used to initialize).
    """
    _check_pair(q0, q1)
    spec = q0.spec
    if not 0 <= l < spec.n_layers - 1:
        raise IndexError(f"hidden layer index {l} out of range")
    ident = PermutationSet.identity(spec)
    if perms is None:
        perms = ident
    # q0 is the reference and is never permuted
    r0m, c0m = _layer_blocks(spec, q0.mean, ident, l, include_bias)
    r1m, c1m = _layer_blocks(spec, q1.mean, perms, l, include_bias)
    if cost == WASSERSTEIN:
        score = r0m @ r1m.T + (0.0 if rows_only else c0m.T @ c1m)
        if use_std:
            r0s, c0s = _layer_blocks(spec, q0.std, ident, l, include_bias)
            r1s, c1s = _layer_blocks(spec, q1.std, perms, l, include_bias)
            score = score + r0s @ r1s.T + (0.0 if rows_only else c0s.T @ c1s)
        return score
    if cost == KL:
        r0w, c0w = _layer_blocks(spec, _kl_weight(q0.std, kl_weighting), ident, l, include_bias)
        score = (2.0 * r0m / r0w) @ r1m.T - (1.0 / r0w) @ (r1m**2).T
        if not rows_only:
            score = score + (2.0 * c0m / c0w).T @ c1m - (1.0 / c0w).T @ c1m**2
        return score
    raise ValueError(f"unknown cost {cost!r}")


def _included(spec, include_bias):
    mask = np.ones(spec.n_params, dtype=bool)
    if not include_bias:
        for _, bs, end in spec.offsets():
            mask[bs:end] = False
    return mask


def total_objective(
    q0: GaussianPosterior,
    q1: GaussianPosterior,
    perms: PermutationSet,
    cost: str = WASSERSTEIN,
    include_bias: bool = True,
    kl_weighting: str = "variance",
    use_std: bool = True,
) -> float:
    """Alignment objective of ``perms`` applied to q1 (higher is better)."""
    _check_pair(q0, q1)
    mask = _included(q0.spec, include_bias)
    m1 = permute_params(q1.spec, q1.mean, perms)[mask]
    m0 = q0.mean[mask]
    if cost == WASSERSTEIN:
        val = float(np.dot(m0, m1))
        if use_std:
            val += float(np.dot(q0.std[mask], permute_params(q1.spec, q1.std, perms)[mask]))
        return val
    if cost == KL:
        w0 = _kl_weight(q0.std, kl_weighting)[mask]
        return -float(np.sum((m0 - m1) ** 2 / w0))
    raise ValueError(f"unknown cost {cost!r}")


IDENTITY_INIT = "identity"
FORWARD_INIT = "forward"


def _forward_init(q0, q1, kwargs):
    # input-to-output pass matching incoming weights only; each layer's rows
    # see the previous layer already matched, so the start is equivariant
    perms = PermutationSet.identity(q0.spec)
    for l in range(q0.spec.n_layers - 1):
        perms.perms[l] = lap.solve_lap_max(layer_score_matrix(q0, q1, perms, l, rows_only=True, **kwargs))
    return perms


def _coordinate_ascent(q0, q1, cost, max_sweeps, seed, include_bias, kl_weighting, use_std, init=FORWARD_INIT):
    _check_pair(q0, q1)
    spec = q0.spec
    if max_sweeps < 1:
        raise ValueError("max_sweeps must be >= 1")
    n_hidden = spec.n_layers - 1
    kwargs = dict(cost=cost, include_bias=include_bias, kl_weighting=kl_weighting, use_std=use_std)
    t0 = time.perf_counter()
    if isinstance(init, PermutationSet):
        perms = PermutationSet([p.copy() for p in init.perms])
    elif init == IDENTITY_INIT:
        perms = PermutationSet.identity(spec)
    elif init == FORWARD_INIT:
        perms = _forward_init(q0, q1, kwargs)
    else:
        raise ValueError(f"init must be 'identity', 'forward' or a PermutationSet, got {init!r}")
    perms.check(spec)
    rng = np.random.default_rng(seed)
    trace = [total_objective(q0, q1, perms, **kwargs)]
    orders = []
    converged = n_hidden == 0
    sweeps = 0
    while not converged and sweeps < max_sweeps:
        sweeps += 1
        order = rng.permutation(n_hidden)
        orders.append(order)
        changed = False
        for l in order:
            scores = layer_score_matrix(q0, q1, perms, l, **kwargs)
            new = lap.solve_lap_max(scores)
            # strict improvement only, so ties cannot cycle
            if lap.objective(new, scores) > lap.objective(perms.perms[l], scores):
                perms.perms[l] = new
                changed = True
        trace.append(total_objective(q0, q1, perms, **kwargs))
        converged = not changed
    report = AlignReport(trace, sweeps, converged, orders, (time.perf_counter() - t0) * 1e3, cost)
    return perms, report


def align_posteriors(
    q0: GaussianPosterior,
    q1: GaussianPosterior,
    cost: str = WASSERSTEIN,
    max_sweeps: int = 100,
    seed: int = 0,
    include_bias: bool = True,
    kl_weighting: str = "variance",
    init=FORWARD_INIT,
):
    """Permutations of q1's hidden units bringing it close to q0.

    Each sweep visits the hidden layers in a seeded random order and replaces
    that layer's permutation by the LAP optimum of
    :func:`layer_score_matrix`. Stops after a sweep that changes nothing
    (``converged=True``) or after ``max_sweeps`` sweeps.

    ``init="forward"`` starts from one input-to-output pass of incoming-weight
    matchings, which makes the result equivariant to relabelling q1's units;
    ``init="identity"`` starts from the unpermuted q1. A
    :class:`PermutationSet` can also be given.
    """
    return _coordinate_ascent(q0, q1, cost, max_sweeps, seed, include_bias, kl_weighting, True, init)


def align_point_estimates(
    theta0, theta1, spec: MlpSpec, max_sweeps: int = 100, seed: int = 0, include_bias: bool = True, init=FORWARD_INIT
):
    """Weight matching: the means-only special case for two parameter vectors."""
    ones = np.ones(spec.n_params)
    q0 = GaussianPosterior(spec, theta0, ones)
    q1 = GaussianPosterior(spec, theta1, ones)
    return _coordinate_ascent(q0, q1, WASSERSTEIN, max_sweeps, seed, include_bias, "variance", False, init)
