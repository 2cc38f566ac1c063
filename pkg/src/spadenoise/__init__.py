"""Noisy SPADE separation estimation and rotation-group noise decoupling."""
__version__ = "0.1.0"

from .fisher import (
    F_MAX,
    cramer_rao,
    fisher_bispade_analytic,
    fisher_direct_imaging,
    fisher_noiseless,
    fisher_numeric,
    fisher_weak_noise,
    limit_order_check,
)
from .fock import displacement, number_state, parity, rotation, vacuum
from .noise import CorrelatedPairModel, GaussianDisplacementModel, PolynomialNoiseModel, effective_sigma
from .protocol import ControlGroup, build_schedule, decoupling_error, group_average, scaling_sweep
from .spade import Povm, distribution, prob_decoupled, prob_gaussian_noise, prob_mc, prob_noiseless, prob_operator

__all__ = [
    "F_MAX", "ControlGroup", "CorrelatedPairModel", "GaussianDisplacementModel", "PolynomialNoiseModel",
    "Povm", "build_schedule", "cramer_rao", "decoupling_error", "displacement", "distribution",
    "effective_sigma", "fisher_bispade_analytic", "fisher_direct_imaging", "fisher_noiseless",
    "fisher_numeric", "fisher_weak_noise", "group_average", "limit_order_check", "number_state",
    "parity", "prob_decoupled", "prob_gaussian_noise", "prob_mc", "prob_noiseless", "prob_operator",
    "rotation", "scaling_sweep", "vacuum",
]
