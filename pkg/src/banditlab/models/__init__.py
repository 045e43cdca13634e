"""Bayesian value models for daily-batch bandit data.

Five likelihoods of increasing structure: independent Beta-Binomial (IBB),
hierarchical Logistic, Beta-Binomial GLM with per-arm overdispersion
(BB-GLM), its random-walk extension (BB-Drift), and the cointegrated walk
with multiplicative arm offsets (BB-Coint).
"""

from .spec import BetaMS, ModelSpec, MODEL_KINDS, default_spec, resolve_spec
from .spec import UnresolvedHyperError
from .targets import build_target, EmptyDataError
from .fit import PosteriorFit, fit, pp_rate_draws, ConvergenceFailure
from .hyper import solve_lambda0, solve_rho0

__all__ = [
    "BetaMS",
    "ModelSpec",
    "MODEL_KINDS",
    "default_spec",
    "resolve_spec",
    "build_target",
    "PosteriorFit",
    "fit",
    "pp_rate_draws",
    "solve_lambda0",
    "solve_rho0",
    "ConvergenceFailure",
    "UnresolvedHyperError",
    "EmptyDataError",
]
