"""Monodromy operator of the 1-D time-periodic Schroedinger equation.

Fourier-truncated propagation, the explicit near-diagonal decomposition of
the monodromy, the two unitary conjugations that push it towards a diagonal
operator, and numerical checks of the accompanying decay estimates.
"""

from .bounds import DecayBound, LemmaReport, check_ineq1, check_ineq2, empirical_cnu, fit_bound
from .potential import FourierPotential, GaugePhase, eval_coefficient, eval_derivative, gauge_normalize, verify_class
from .propagator import IntegratorConfig, ModeGrid, OperatorMatrix, StateVector, monodromy, propagate, unitarity_defect
from .decomposition import Decomposition, build_m0, build_m1, build_md, check_bound, residual_m2
from .conjugation import Generator, build_G, conjugate, exp_skew, power_decay_check
from .blockdiag import assemble_theorem2, diagonalize_unitary, gram, orthonormalize
from .config import ConfigError, RunConfig, load_config
from .pipeline import run_converge, run_decompose, run_diagonalize, run_lemmas
from .report import DecompositionReport

__version__ = "0.1.0"

__all__ = [
    "DecayBound",
    "LemmaReport",
    "check_ineq1",
    "check_ineq2",
    "empirical_cnu",
    "fit_bound",
    "FourierPotential",
    "GaugePhase",
    "eval_coefficient",
    "eval_derivative",
    "gauge_normalize",
    "verify_class",
    "IntegratorConfig",
    "ModeGrid",
    "OperatorMatrix",
    "StateVector",
    "monodromy",
    "propagate",
    "unitarity_defect",
    "Decomposition",
    "build_m0",
    "build_m1",
    "build_md",
    "check_bound",
    "residual_m2",
    "Generator",
    "build_G",
    "conjugate",
    "exp_skew",
    "power_decay_check",
    "assemble_theorem2",
    "diagonalize_unitary",
    "gram",
    "orthonormalize",
    "ConfigError",
    "RunConfig",
    "load_config",
    "run_converge",
    "run_decompose",
    "run_diagonalize",
    "run_lemmas",
    "DecompositionReport",
]
