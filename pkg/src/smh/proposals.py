"""Gaussian proposals ``q(theta, .) = N(A theta + b, C)`` and their reversibility checks."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve, solve_triangular

from .surrogate import TaylorSurrogate

log = logging.getLogger(__name__)

NONE, FIRST_ORDER, SECOND_ORDER = "none", "first_order", "second_order"


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class ScaledRW:
    """Random walk with covariance ``sigma^2 / n * I``."""
    sigma: float = 1.0


@dataclass(frozen=True)
class PreconditionedRW:
    """Random walk with covariance ``sigma^2 H^-1``, ``H`` the Hessian at the mode."""
    sigma: float = 1.0


@dataclass(frozen=True)
class FirstOrderReversible:
    """Drifted walk that is reversible for the first-order surrogate."""
    sigma: float = 1.0


@dataclass(frozen=True)
class PCN:
    """Preconditioned Crank-Nicolson move, reversible for the second-order surrogate."""
    rho: float = 0.0


ProposalKind = ScaledRW | PreconditionedRW | FirstOrderReversible | PCN


@dataclass(frozen=True, eq=False)
class GaussianProposal:
    A: np.ndarray
    b: np.ndarray
    C: np.ndarray
    reversible: str = NONE
    chol: np.ndarray = field(init=False)
    chol_inv: np.ndarray = field(init=False)
    symmetric: bool = field(init=False)

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        b = np.atleast_1d(np.asarray(self.b, dtype=float))
        C = np.atleast_2d(np.asarray(self.C, dtype=float))
        d = b.shape[0]
        if A.shape != (d, d) or C.shape != (d, d):
            raise ValueError(f"shape mismatch: A {A.shape}, b {b.shape}, C {C.shape}")
        if self.reversible not in (NONE, FIRST_ORDER, SECOND_ORDER):
            raise ValueError(f"unknown reversibility flag {self.reversible!r}")
        try:
            L = np.linalg.cholesky(C)
        except np.linalg.LinAlgError:
            raise NotPositiveDefiniteError("proposal covariance is not positive definite") from None
        Linv = solve_triangular(L, np.eye(d), lower=True)
        for name, val in (("A", A), ("b", b), ("C", C), ("chol", L), ("chol_inv", Linv)):
            val = np.ascontiguousarray(val)
            val.setflags(write=False)
            object.__setattr__(self, name, val)
        object.__setattr__(
            self, "symmetric", bool(np.array_equal(A, np.eye(d)) and not b.any()))

    @property
    def d(self) -> int:
        return self.b.shape[0]

    def mean(self, theta) -> np.ndarray:
        return self.A @ theta + self.b

    def propose(self, theta, rng: np.random.Generator) -> np.ndarray:
        z = rng.standard_normal(self.d)
        return self.A @ theta + self.b + self.chol @ z

    def log_density(self, theta, theta_prime) -> float:
        """``log q(theta, theta')`` up to the normalising constant."""
        r = self.chol_inv @ (np.asarray(theta_prime) - self.A @ theta - self.b)
        return -0.5 * float(r @ r)

    def log_q_ratio(self, theta, theta_prime) -> float:
        """``log q(theta', theta) - log q(theta, theta')``."""
        if self.symmetric:
            return 0.0
        return self.log_density(theta_prime, theta) - self.log_density(theta, theta_prime)

    def skips_solitary(self, order: int) -> bool:
        """Whether this proposal is reversible for the order-``order`` surrogate."""
        return (self.reversible == FIRST_ORDER and order == 1) or (
            self.reversible == SECOND_ORDER and order == 2)


def propose(p: GaussianProposal, theta, rng) -> np.ndarray:
    return p.propose(theta, rng)


def log_q_ratio(p: GaussianProposal, theta, theta_prime) -> float:
    return p.log_q_ratio(theta, theta_prime)


def surrogate_quadratic(s: TaylorSurrogate, order: int):
    """``(D, e)`` with ``-log pihat_order(theta) = theta'D theta/2 + e'theta + const``."""
    if order == 1:
        return np.zeros((s.d, s.d)), s.grad_total.copy()
    if order == 2:
        H = s.hess_total
        return H.copy(), s.grad_total - H @ s.theta_hat
    raise ValueError(f"order must be 1 or 2, got {order}")


def verify_reversibility(p: GaussianProposal, D, e, tol: float = 1e-8):
    """Check the three matrix identities characterising reversibility.

    Returns ``(ok, max_residual)`` where the residual is the largest
    absolute entry among ``A'C^-1 - C^-1 A``, ``A^2 - (I - C D)`` and
    ``(A' + I) b + C e``.
    """
    A, b, C = p.A, p.b, p.C
    d = p.d
    Cinv = cho_solve((p.chol, True), np.eye(d))
    r1 = A.T @ Cinv - Cinv @ A
    r2 = A @ A - (np.eye(d) - C @ np.asarray(D))
    r3 = (A.T + np.eye(d)) @ b + C @ np.asarray(e)
    resid = max(np.abs(r1).max(), np.abs(r2).max(), np.abs(r3).max())
    return bool(resid < tol), float(resid)


def joint_asymmetry(p: GaussianProposal, s: TaylorSurrogate, theta, theta_prime, order=None) -> float:
    """``F(theta, theta') - F(theta', theta)`` with ``F = -log pihat - log q``.

    Zero for every pair exactly when ``q`` is reversible for the surrogate.
    """
    if order is None:
        order = 2 if p.reversible == SECOND_ORDER else 1

    def F(a, c):
        return s.total_offset(a, order) - p.log_density(a, c)

    return F(theta, theta_prime) - F(theta_prime, theta)


def _hessian_inverse(H: np.ndarray) -> np.ndarray:
    try:
        c = cho_factor(H, lower=True)
    except np.linalg.LinAlgError:
        raise NotPositiveDefiniteError(
            "Hessian at the expansion point is not positive definite; "
            "move theta_hat closer to the posterior mode") from None
    Hinv = cho_solve(c, np.eye(H.shape[0]))
    return 0.5 * (Hinv + Hinv.T)


def make_proposal(kind: ProposalKind, n: int, surrogate: TaylorSurrogate) -> GaussianProposal:
    """Build a proposal scaled to a posterior concentrating like ``1/sqrt(n)``."""
    d = surrogate.d
    eye = np.eye(d)
    g, theta_hat = surrogate.grad_total, surrogate.theta_hat
    if isinstance(kind, ScaledRW):
        _positive(kind.sigma, "sigma")
        return GaussianProposal(eye, np.zeros(d), kind.sigma ** 2 / n * eye)
    if isinstance(kind, PreconditionedRW):
        _positive(kind.sigma, "sigma")
        Hinv = _hessian_inverse(surrogate.hess_total)
        return GaussianProposal(eye, np.zeros(d), kind.sigma ** 2 * Hinv)
    if isinstance(kind, FirstOrderReversible):
        _positive(kind.sigma, "sigma")
        p = GaussianProposal(eye, -kind.sigma / (2.0 * n) * g, kind.sigma / n * eye,
                             reversible=FIRST_ORDER)
        return _checked(p, surrogate, 1)
    if isinstance(kind, PCN):
        if not 0.0 <= kind.rho < 1.0:
            raise ValueError(f"rho must lie in [0, 1), got {kind.rho}")
        Hinv = _hessian_inverse(surrogate.hess_total)
        sr = np.sqrt(kind.rho)
        p = GaussianProposal(sr * eye, (1.0 - sr) * (theta_hat - Hinv @ g),
                             (1.0 - kind.rho) * Hinv, reversible=SECOND_ORDER)
        return _checked(p, surrogate, 2)
    raise TypeError(f"unknown proposal kind {kind!r}")


def _positive(x, name):
    if not x > 0:
        raise ValueError(f"{name} must be positive, got {x}")


def _checked(p: GaussianProposal, s: TaylorSurrogate, order: int) -> GaussianProposal:
    D, e = surrogate_quadratic(s, order)
    ok, resid = verify_reversibility(p, D, e)
    if ok:
        return p
    log.warning("reversibility check failed (residual %.3g); "
                "the solitary factor will be simulated", resid)
    return GaussianProposal(p.A, p.b, p.C, reversible=NONE)
