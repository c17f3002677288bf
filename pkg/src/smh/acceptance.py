"""Acceptance evaluators: full MH, the sequential factor cascade, and Poisson thinning.

All evaluators report how many likelihood factors they touched.  One
unit is counted per factor index processed, whether that involves the
factor alone (MH) or the factor together with its surrogate.

Random numbers are consumed in a fixed order so that the compiled chain
kernel can replay the same stream:

* a uniform for the solitary factor, only when its log-ratio is negative;
* a Poisson count, only when the bound ``lambda_bar`` is positive;
* per thinning step, two uniforms for the alias draw and one for the coin.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .alias import AliasTable, build_alias
from .models import FactorModel
from .proposals import GaussianProposal
from .surrogate import TaylorSurrogate

# slack for rounding in the bound check; real violations are far larger
BOUND_ATOL = 1e-10
BOUND_RTOL = 1e-9


class BoundViolationError(ArithmeticError):
    """A factor's log-ratio exceeded its supposedly global upper bound."""

    def __init__(self, index: int, lam: float, lam_bar: float):
        super().__init__(
            f"factor {index}: lambda = {lam:.6g} exceeds its bound {lam_bar:.6g}")
        self.index = index


@dataclass(frozen=True)
class AcceptanceOutcome:
    accepted: bool
    evaluations: int
    poisson_draw: Optional[int] = None
    solitary_evaluated: bool = False


class LipschitzBound:
    """Bounds ``lambda_i <= K_i |theta - theta'|_1`` for the plain per-datum factorisation.

    This is the naive construction without control variates; its total
    bound grows like ``sqrt(n)`` for proposals scaled to the posterior.
    """

    order = 0

    def __init__(self, model: FactorModel, constants=None):
        K = np.asarray(model.ubar(1) if constants is None else constants, dtype=float)
        if K.shape != (model.m,) or np.any(K < 0) or not np.all(np.isfinite(K)):
            raise ValueError("need one finite nonnegative constant per factor")
        self.psi = K
        self.Psi = math.fsum(K)
        self.alias: Optional[AliasTable] = build_alias(K) if self.Psi > 0 else None

    def phi(self, theta, theta_prime) -> float:
        return float(np.abs(np.asarray(theta_prime) - theta).sum())

    def lambda_bar(self, theta, theta_prime) -> float:
        return self.phi(theta, theta_prime) * self.Psi

    def lambda_factor(self, model, i, theta, theta_prime) -> float:
        return max(0.0, model.factor_potential(i, theta_prime) - model.factor_potential(i, theta))

    def lambda_factors(self, model, theta, theta_prime) -> np.ndarray:
        return np.maximum(0.0, model.potentials(theta_prime) - model.potentials(theta))


def solitary_log_ratio(bound, proposal: GaussianProposal, theta, theta_prime) -> Optional[float]:
    """Log of the extra non-subsampled factor, or ``None`` when it is identically one.

    With a Taylor surrogate this is ``1 ^ pihat(theta') q(theta', theta) /
    (pihat(theta) q(theta, theta'))``; for the naive bound only the
    proposal ratio remains.
    """
    if isinstance(bound, TaylorSurrogate):
        if proposal.skips_solitary(bound.order):
            return None
        lr = (bound.total_offset(theta) - bound.total_offset(theta_prime)
              + proposal.log_q_ratio(theta, theta_prime))
        return min(0.0, lr)
    if proposal.symmetric:
        return None
    return min(0.0, proposal.log_q_ratio(theta, theta_prime))


def _passes(log_p: float, rng) -> bool:
    # a uniform is consumed only when the outcome is random
    if log_p >= 0.0:
        return True
    return rng.random() < math.exp(log_p)


def accept_mh(model: FactorModel, theta, theta_prime, proposal: GaussianProposal,
              rng) -> AcceptanceOutcome:
    """Standard MH test; touches all ``m`` factors."""
    log_r = (model.potential(theta) - model.potential(theta_prime)
             + proposal.log_q_ratio(theta, theta_prime))
    return AcceptanceOutcome(_passes(log_r, rng), model.m)


def accept_fmh_cascade(model: FactorModel, bound, theta, theta_prime, rng,
                       solitary: Optional[float] = None) -> AcceptanceOutcome:
    """One Bernoulli trial per factor, stopping at the first rejection.

    The solitary factor (log-ratio ``solitary``) is tried first, then the
    residual factors in index order.
    """
    if solitary is not None and not _passes(solitary, rng):
        return AcceptanceOutcome(False, 0, None, True)
    lams = bound.lambda_factors(model, theta, theta_prime)
    for i, lam in enumerate(lams):
        if lam > 0.0 and rng.random() >= math.exp(-lam):
            return AcceptanceOutcome(False, i + 1, None, solitary is not None)
    return AcceptanceOutcome(True, model.m, None, solitary is not None)


def accept_smh_poisson(model: FactorModel, bound, theta, theta_prime,
                       solitary: Optional[float], rng,
                       alias: Optional[AliasTable] = None) -> AcceptanceOutcome:
    """Factorised acceptance via thinning of a discrete Poisson process.

    Draws ``N ~ Poisson(phi * Psi)`` candidate factors from the alias table
    over ``psi`` and rejects at the first candidate whose coin
    ``lambda_i / (phi psi_i)`` comes up.  The acceptance probability equals
    the product of the per-factor acceptance terms exactly.
    """
    alias = bound.alias if alias is None else alias
    if solitary is not None and not _passes(solitary, rng):
        return AcceptanceOutcome(False, 0, None, True)
    phi = bound.phi(theta, theta_prime)
    lam_bar = phi * bound.Psi
    n_draw = int(rng.poisson(lam_bar)) if lam_bar > 0.0 else 0
    psi = bound.psi
    for j in range(n_draw):
        i = alias.sample(rng)
        lam = bound.lambda_factor(model, i, theta, theta_prime)
        cap = phi * psi[i]
        if lam > cap:
            if lam - cap > BOUND_ATOL + BOUND_RTOL * cap:
                raise BoundViolationError(i, lam, cap)
            lam = cap
        if rng.random() < lam / cap:
            return AcceptanceOutcome(False, j + 1, n_draw, solitary is not None)
    return AcceptanceOutcome(True, n_draw, n_draw, solitary is not None)


def accept_tfmh(model: FactorModel, bound, theta, theta_prime, R: float,
                proposal: GaussianProposal, rng) -> AcceptanceOutcome:
    """Subsampled test while ``lambda_bar < R``, full MH otherwise."""
    if bound.lambda_bar(theta, theta_prime) < R:
        sol = solitary_log_ratio(bound, proposal, theta, theta_prime)
        return accept_smh_poisson(model, bound, theta, theta_prime, sol, rng)
    return accept_mh(model, theta, theta_prime, proposal, rng)


def log_acceptance_probability(model: FactorModel, bound, theta, theta_prime,
                               proposal: GaussianProposal) -> float:
    """Closed-form log of the factorised acceptance probability."""
    sol = solitary_log_ratio(bound, proposal, theta, theta_prime)
    lam = math.fsum(bound.lambda_factors(model, theta, theta_prime))
    return (0.0 if sol is None else sol) - lam


def log_mh_acceptance_probability(model: FactorModel, theta, theta_prime,
                                  proposal: GaussianProposal) -> float:
    return min(0.0, model.potential(theta) - model.potential(theta_prime)
               + proposal.log_q_ratio(theta, theta_prime))
