"""Locating the Taylor expansion point: one SGD pass, then damped Newton refinement."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .models import FactorModel


class DivergenceError(FloatingPointError):
    pass


@dataclass(frozen=True)
class ModeConfig:
    sgd_epochs: int = 1
    batch_size: int = 32
    step_scale: float = 0.5     # step c/sqrt(t) with c = step_scale / n on the summed gradient
    refine_steps: int = 20
    grad_tol: float = 1e-10     # refinement stops once |grad U| <= grad_tol * m


@dataclass(frozen=True)
class ModeResult:
    theta_hat: np.ndarray
    grad_norm: float
    hessian: np.ndarray
    hessian_pd: bool
    iterations: int


def _is_pd(H: np.ndarray) -> bool:
    try:
        np.linalg.cholesky(H)
    except np.linalg.LinAlgError:
        return False
    return True


def sgd_pass(model: FactorModel, theta: np.ndarray, config: ModeConfig, rng) -> tuple[np.ndarray, int]:
    m = model.m
    B = max(1, min(config.batch_size, m))
    c = config.step_scale / m
    t = 0
    g0 = None
    for _ in range(config.sgd_epochs):
        order = rng.permutation(m)
        for start in range(0, m, B):
            idx = order[start:start + B]
            t += 1
            g = model.gradient_subset(idx, theta) * (m / idx.size)
            gn = float(np.linalg.norm(g))
            if g0 is None:
                g0 = max(gn, 1e-300)
            if not math.isfinite(gn) or gn > 1e6 * g0:
                raise DivergenceError(
                    f"SGD diverged at step {t} (gradient norm {gn:.3g}); "
                    "try a smaller step_scale")
            theta = theta - (c / math.sqrt(t)) * g
    return theta, t


def refine(model: FactorModel, theta: np.ndarray, config: ModeConfig) -> tuple[np.ndarray, int]:
    """Newton steps with Armijo backtracking; ``U`` never increases."""
    steps = 0
    u = model.potential(theta)
    for _ in range(config.refine_steps):
        g = model.gradient(theta)
        if np.linalg.norm(g) <= config.grad_tol * model.m:
            break
        H = model.hessian(theta)
        try:
            L = np.linalg.cholesky(H)
            p = -np.linalg.solve(L.T, np.linalg.solve(L, g))
        except np.linalg.LinAlgError:
            scale = max(np.abs(np.linalg.eigvalsh(H)).max(), 1.0)
            p = -g / scale
        slope = float(g @ p)
        alpha = 1.0
        for _ in range(60):
            cand = theta + alpha * p
            u_new = model.potential(cand)
            if math.isfinite(u_new) and u_new <= u + 1e-4 * alpha * slope:
                break
            alpha *= 0.5
        else:
            break
        if u_new > u:
            break
        theta, u = cand, u_new
        steps += 1
    return theta, steps


def find_mode(model: FactorModel, config: Optional[ModeConfig] = None, rng=None,
              theta0=None) -> ModeResult:
    """Approximate posterior mode from a zero start, plus the Hessian there."""
    config = ModeConfig() if config is None else config
    rng = np.random.default_rng(rng)
    theta = np.zeros(model.d) if theta0 is None else np.array(theta0, dtype=float)
    theta, n_sgd = sgd_pass(model, theta, config, rng)
    theta, n_ref = refine(model, theta, config)
    g = model.gradient(theta)
    gn = float(np.linalg.norm(g))
    if not math.isfinite(gn):
        raise DivergenceError("gradient is not finite at the returned point")
    H = model.hessian(theta)
    H = 0.5 * (H + H.T)
    return ModeResult(theta, gn, H, _is_pd(H), n_sgd + n_ref)
