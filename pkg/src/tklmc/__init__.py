"""Tamed kinetic Langevin Monte Carlo (tKLMC1 / tKLMC2) for strongly convex
potentials with superlinearly growing gradients."""

from .diagnostics import (
    DiagnosticsReport,
    ReferenceTarget1D,
    build_reference_1d,
    build_reference_radial,
    empirical_moments,
    excess_risk_estimate,
    geometric_decay_fit,
    sliced_w2,
    w2_1d_empirical_vs_reference,
)
from .kernels import GaussianPairKernel, build_kernel, psi, sample_pair
from .moreau import MoreauConfig, my_grad, my_gradient_gap, my_value, prox
from .samplers import (
    ChainConfig,
    InitSpec,
    KineticState,
    Trajectory,
    exact_klmc_quadratic_stationary_cov,
    overdamped_tamed_step,
    run_chain,
    tklmc1_step,
    tklmc2_step,
    validate_params,
)
from .taming import TamedGradient, tame, taming_error_estimate
from .targets import (
    InvariantMeasureSpec,
    TargetPotential,
    custom_target,
    invariant_moment_bounds,
    quadratic_target,
    quartic_target,
    target_from_name,
)

__version__ = "0.1.0"
