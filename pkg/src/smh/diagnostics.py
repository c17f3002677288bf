"""Chain diagnostics: ESS, batch-means errors, scaling slopes, quadrature oracle."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .kernels import ChainTrace
from .models import FactorModel

#: ESS of a trace with zero sample variance
ZERO_VARIANCE_ESS = math.nan


def autocorrelation(x) -> np.ndarray:
    """Biased empirical autocorrelation at lags ``0..L-1`` via FFT."""
    x = np.asarray(x, dtype=float)
    L = x.size
    xc = x - x.mean()
    nfft = 1 << (2 * L - 1).bit_length()
    f = np.fft.rfft(xc, nfft)
    acov = np.fft.irfft(f * np.conjugate(f), nfft)[:L] / L
    return acov / acov[0]


def ess(trace) -> float:
    """Effective sample size with Geyer's initial positive sequence truncation.

    The integrated autocorrelation time is floored at ``1 / log10(L)`` so
    antithetic chains get a large but finite ESS.  A constant trace yields
    :data:`ZERO_VARIANCE_ESS`.
    """
    x = np.asarray(trace, dtype=float)
    if x.ndim != 1:
        raise ValueError("ess expects a 1-d trace")
    L = x.size
    if L < 100:
        raise ValueError(f"need at least 100 samples for ESS, got {L}")
    if np.ptp(x) == 0:
        return ZERO_VARIANCE_ESS
    rho = autocorrelation(x)
    n_pairs = L // 2
    gamma = rho[0:2 * n_pairs:2] + rho[1:2 * n_pairs:2]
    nonpos = np.flatnonzero(gamma <= 0)
    stop = nonpos[0] if nonpos.size else n_pairs
    tau = -1.0 + 2.0 * gamma[:stop].sum()
    tau = max(tau, 1.0 / math.log10(L))
    return float(L / tau)


def batch_means_se(x, n_batches: Optional[int] = None) -> float:
    """Monte Carlo standard error of the mean by non-overlapping batch means.

    Default uses ``floor(sqrt(L))`` batches of equal size.
    """
    x = np.asarray(x, dtype=float)
    L = x.size
    nb = int(math.isqrt(L)) if n_batches is None else int(n_batches)
    if nb < 2:
        raise ValueError("need at least two batches")
    size = L // nb
    means = x[:nb * size].reshape(nb, size).mean(axis=1)
    return float(means.std(ddof=1) / math.sqrt(nb))


@dataclass(frozen=True)
class ChainSummary:
    ess: np.ndarray
    ess_per_second: np.ndarray
    accept_rate: float
    mean_evals: float
    median_evals: float
    wall_seconds: float


def summarize(trace: ChainTrace) -> ChainSummary:
    e = np.array([ess(trace.states[:, j]) for j in range(trace.states.shape[1])])
    wall = trace.wall_time
    return ChainSummary(
        ess=e,
        ess_per_second=e / wall if wall > 0 else np.full_like(e, math.inf),
        accept_rate=trace.acceptance_rate,
        mean_evals=trace.mean_evals,
        median_evals=float(np.median(trace.evals)),
        wall_seconds=wall,
    )


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    stderr: float
    intercept: float
    dropped_first: bool


def fit_loglog_slope(ns: Sequence[float], values: Sequence[float],
                     drop_outlier: bool = True) -> SlopeFit:
    """Least-squares slope of ``log(values)`` against ``log(ns)``.

    With ``drop_outlier`` the smallest ``n`` is discarded when its
    externally studentized residual exceeds 3 and at least three points
    remain.
    """
    x = np.log(np.asarray(ns, dtype=float))
    y = np.log(np.asarray(values, dtype=float))
    if x.size < 2:
        raise ValueError("need at least two points")
    if np.any(np.diff(x) <= 0):
        raise ValueError("n grid must be strictly increasing")
    dropped = False
    if drop_outlier and x.size >= 4:
        t = _studentized_residual_first(x, y)
        if abs(t) > 3:
            x, y, dropped = x[1:], y[1:], True
    slope, intercept, se = _ols(x, y)
    return SlopeFit(slope, se, intercept, dropped)


def _ols(x, y):
    X = np.column_stack([np.ones_like(x), x])
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    dof = x.size - 2
    if dof > 0:
        resid = y - X @ coef
        s2 = resid @ resid / dof
        se = math.sqrt(s2 * np.linalg.inv(X.T @ X)[1, 1])
    else:
        se = math.nan
    return float(coef[1]), float(coef[0]), se


def _studentized_residual_first(x, y) -> float:
    # residual of point 0 against the fit to the remaining points
    slope, intercept, _ = _ols(x[1:], y[1:])
    X = np.column_stack([np.ones(x.size - 1), x[1:]])
    resid = y[1:] - (intercept + slope * x[1:])
    dof = x.size - 3
    if dof <= 0:
        return 0.0
    s2 = resid @ resid / dof
    if s2 == 0:
        return 0.0
    v = np.array([1.0, x[0]])
    lev = v @ np.linalg.inv(X.T @ X) @ v
    return float((y[0] - intercept - slope * x[0]) / math.sqrt(s2 * (1 + lev)))


class QuadratureError(RuntimeError):
    pass


@dataclass(frozen=True)
class QuadratureResult:
    mean: np.ndarray
    cov: np.ndarray
    boundary_mass: float


def quadrature_posterior_oracle(model: FactorModel, center=None, scale=None,
                                width: float = 10.0, points: Optional[int] = None,
                                tol: float = 1e-8) -> QuadratureResult:
    """Posterior mean and covariance of ``exp(-U)`` by the trapezoid rule, for ``d <= 2``.

    The box is ``center +- width * scale`` per coordinate; by default the
    centre is the mode and the scale the Laplace standard deviations.
    Raises :class:`QuadratureError` when the normalised mass on the box
    boundary exceeds ``tol``.
    """
    d = model.d
    if d > 2:
        raise ValueError("quadrature oracle supports d <= 2")
    if center is None or scale is None:
        from .mode import find_mode
        mr = find_mode(model, rng=0)
        if center is None:
            center = mr.theta_hat
        if scale is None:
            if not mr.hessian_pd:
                raise QuadratureError("Hessian at the mode is not positive definite")
            scale = np.sqrt(np.diag(np.linalg.inv(mr.hessian)))
    center = np.broadcast_to(np.asarray(center, dtype=float), (d,))
    scale = np.broadcast_to(np.asarray(scale, dtype=float), (d,))
    if points is None:
        points = 4001 if d == 1 else 401
    axes = [np.linspace(c - width * s, c + width * s, points) for c, s in zip(center, scale)]
    grids = np.meshgrid(*axes, indexing="ij")
    pts = np.column_stack([g.ravel() for g in grids])
    logp = -model.potential_batch(pts).reshape(grids[0].shape)
    w = np.exp(logp - logp.max())
    # trapezoid weights as an outer product
    tw = [np.full(points, ax[1] - ax[0]) for ax in axes]
    for t in tw:
        t[[0, -1]] *= 0.5
    W = tw[0] if d == 1 else np.outer(tw[0], tw[1])
    mass = w * W
    Z = mass.sum()
    edge = np.zeros_like(w, dtype=bool)
    for k in range(d):
        sl = [slice(None)] * d
        sl[k] = 0
        edge[tuple(sl)] = True
        sl[k] = -1
        edge[tuple(sl)] = True
    # boundary density times box volume, relative to the total mass
    volume = np.prod([ax[-1] - ax[0] for ax in axes])
    boundary = float(w[edge].max() * volume / Z)
    if boundary > tol:
        raise QuadratureError(
            f"boundary mass {boundary:.3g} exceeds {tol:g}; widen the box")
    probs = (mass / Z).reshape(-1)
    mean = probs @ pts
    c = pts - mean
    cov = (c * probs[:, None]).T @ c
    return QuadratureResult(mean, cov, boundary)
