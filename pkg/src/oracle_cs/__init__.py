"""Oracle receiver for compressed sensing: exact average error and simulations."""

__version__ = "0.1.0"

from .model import Basis, Rng, SensingSetup, SparseSignal, dct_basis, gen_sensing_matrix, gen_sparse_signal, make_setup, measure
from .noise import (
    Ar1,
    CovarianceSummary,
    DeterministicChannelError,
    Quantizer,
    White,
    covariance,
    covariance_summary,
    quantize_uniform,
    sample_noise,
)
from .oracle import OracleReconstruction, SingularSupportError, oracle_reconstruct, restrict_columns
from .theory import (
    BoundSet,
    DomainError,
    RipGuardError,
    WishartCheckReport,
    closed_form_mse,
    closed_form_mse_white,
    rip_bound_correlated,
    rip_bounds_white,
    rip_constant_bruteforce,
    rip_constant_svd,
    wishart_pinv_mean_check,
)
from .mc import ExperimentConfig, SweepResult, run_sweep, run_trial
