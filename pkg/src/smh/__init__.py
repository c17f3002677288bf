"""Scalable Metropolis-Hastings: factorised MH with control-variate surrogates.

Subsampled acceptance tests whose expected cost per iteration shrinks with
the data size, while the chain still targets the exact posterior.
"""
from .acceptance import (AcceptanceOutcome, BoundViolationError, LipschitzBound,
                         accept_fmh_cascade, accept_mh, accept_smh_poisson, accept_tfmh,
                         log_acceptance_probability)
from .alias import AliasTable, build_alias
from .diagnostics import (ChainSummary, batch_means_se, ess, fit_loglog_slope,
                          quadrature_posterior_oracle, summarize)
from .experiments import ScalingStudyResult, StudyKernel, rho_study, scaling_study
from .kernels import (ChainTrace, KernelConfig, acceptance_trials, available_backends,
                      run_chain, run_naive_fmh)
from .mode import ModeConfig, ModeResult, find_mode
from .models import (Dataset, LogisticRegression, RobustLinearRegression, build_model,
                     generate_synthetic, load_csv)
from .proposals import PCN, FirstOrderReversible, PreconditionedRW, ScaledRW, make_proposal
from .surrogate import TaylorSurrogate, build_surrogate

__version__ = "0.1.0"

__all__ = [
    "AcceptanceOutcome", "BoundViolationError", "LipschitzBound", "accept_fmh_cascade",
    "accept_mh", "accept_smh_poisson", "accept_tfmh", "log_acceptance_probability",
    "AliasTable", "build_alias", "ChainSummary", "batch_means_se", "ess", "fit_loglog_slope",
    "quadrature_posterior_oracle", "summarize", "ScalingStudyResult", "StudyKernel",
    "rho_study", "scaling_study", "ChainTrace", "KernelConfig", "acceptance_trials",
    "available_backends", "run_chain", "run_naive_fmh", "ModeConfig", "ModeResult",
    "find_mode", "Dataset", "LogisticRegression", "RobustLinearRegression", "build_model",
    "generate_synthetic", "load_csv", "PCN", "FirstOrderReversible", "PreconditionedRW",
    "ScaledRW", "make_proposal", "TaylorSurrogate", "build_surrogate",
]
