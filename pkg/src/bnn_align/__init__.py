"""Aligning mean-field variational posteriors of MLPs under permutation symmetry."""

from .align import (
    AlignReport,
    PermutationSet,
    align_point_estimates,
    align_posteriors,
    layer_score_matrix,
    pushforward,
    total_objective,
)
from .bnn import GaussianPosterior, MlpSpec, Prior, forward, log_likelihood, log_prior, sample_params
from .data import Dataset, normalize_split, parse_idx, synth_regression
from .evaluate import BarrierReport, accuracy, barrier, predictive_loglik, slice_logposterior
from .interp import geodesic, mixture_predictive, w2_squared
from .lap import permute_rows, solve_lap_max
from .vi import TrainConfig, elbo_gradient, estimate_elbo, kl_gaussians, train_vi

__version__ = "0.1.0"
