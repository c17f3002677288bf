"""Factorised targets: per-factor potentials, derivatives and derivative bounds.

A target ``pi(theta) ∝ prod_i pi_i(theta)`` is described through the
potentials ``U_i = -log pi_i``.  Besides values, gradients and Hessians,
every model carries constants ``ubar(order)[i]`` bounding, uniformly in
``theta``, the absolute value of every partial derivative of ``U_i`` of
the given order.  Those constants are what make the subsampled
acceptance step possible.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import expit


class DataError(ValueError):
    """Raised for malformed or inconsistent input data."""


@dataclass(frozen=True)
class Dataset:
    covariates: np.ndarray
    responses: np.ndarray

    def __post_init__(self):
        X = np.ascontiguousarray(self.covariates, dtype=float)
        y = np.ascontiguousarray(self.responses, dtype=float)
        if X.ndim != 2:
            raise DataError(f"covariates must be 2-d, got shape {X.shape}")
        if y.ndim != 1:
            raise DataError(f"responses must be 1-d, got shape {y.shape}")
        if X.shape[0] < 1 or X.shape[1] < 1:
            raise DataError("dataset needs n >= 1 rows and d >= 1 columns")
        if X.shape[0] != y.shape[0]:
            raise DataError(
                f"{X.shape[0]} covariate rows but {y.shape[0]} responses")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise DataError("dataset contains non-finite values")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "covariates", X)
        object.__setattr__(self, "responses", y)

    @property
    def n(self) -> int:
        return self.covariates.shape[0]

    @property
    def d(self) -> int:
        return self.covariates.shape[1]


@dataclass(frozen=True)
class LogisticRegression:
    """Model kind tag for Bernoulli responses with a logistic link."""


@dataclass(frozen=True)
class RobustLinearRegression:
    """Model kind tag for Student-t residuals with ``nu`` degrees of freedom."""

    nu: float = 4.0

    def __post_init__(self):
        if not self.nu > 0:
            raise DataError(f"degrees of freedom must be positive, got {self.nu}")


ModelKind = LogisticRegression | RobustLinearRegression


class FactorModel:
    """Base class for a target factorised into ``m`` potentials.

    Subclasses implement the vectorised evaluators; the scalar
    ``factor_*`` helpers fall back on them.  Instances are immutable.
    """

    m: int
    d: int

    def potentials(self, theta: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def gradients(self, theta: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def hessians(self, theta: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def ubar(self, order: int) -> np.ndarray:
        raise NotImplementedError

    def factor_potential(self, i: int, theta: np.ndarray) -> float:
        return float(self.potentials(theta)[i])

    def factor_gradient(self, i: int, theta: np.ndarray) -> np.ndarray:
        return self.gradients(theta)[i]

    def factor_hessian(self, i: int, theta: np.ndarray) -> np.ndarray:
        return self.hessians(theta)[i]

    def potential(self, theta: np.ndarray) -> float:
        """Total potential ``U(theta) = sum_i U_i(theta)``."""
        return float(np.sum(self.potentials(theta)))

    def gradient(self, theta: np.ndarray) -> np.ndarray:
        return self.gradients(theta).sum(axis=0)

    def hessian(self, theta: np.ndarray) -> np.ndarray:
        return self.hessians(theta).sum(axis=0)

    def potential_batch(self, thetas: np.ndarray) -> np.ndarray:
        """Total potential at each row of ``thetas``."""
        return np.array([self.potential(t) for t in np.atleast_2d(thetas)])

    def gradient_subset(self, idx: np.ndarray, theta: np.ndarray) -> np.ndarray:
        """Sum of the gradients of the factors listed in ``idx``."""
        return self.gradients(theta)[idx].sum(axis=0)


class GLMModel(FactorModel):
    """Factors of the form ``U_i(theta) = f(x_i . theta, y_i)``.

    Subclasses supply ``f`` and its first three derivatives in the linear
    predictor, plus the suprema of their absolute values used for bounds.
    """

    #: identifier understood by the compiled chain kernel, if any
    core_code: Optional[int] = None

    def __init__(self, data: Dataset):
        self.data = data
        self.X = data.covariates
        self.y = data.responses
        self.m, self.d = self.X.shape
        self._absmax = np.abs(self.X).max(axis=1)
        self._ubar = {
            order: self._derivative_sup(order) * self._absmax ** order
            for order in (1, 2, 3)
        }
        for arr in self._ubar.values():
            arr.setflags(write=False)

    # link-level pieces -------------------------------------------------
    def _f(self, z, y):
        raise NotImplementedError

    def _df(self, z, y):
        raise NotImplementedError

    def _d2f(self, z, y):
        raise NotImplementedError

    def _d3f(self, z, y):
        raise NotImplementedError

    def _derivative_sup(self, order: int) -> float:
        raise NotImplementedError

    # factor-level evaluators --------------------------------------------
    def potentials(self, theta):
        return self._f(self.X @ np.asarray(theta, dtype=float), self.y)

    def gradients(self, theta):
        w = self._df(self.X @ np.asarray(theta, dtype=float), self.y)
        return w[:, None] * self.X

    def hessians(self, theta):
        w = self._d2f(self.X @ np.asarray(theta, dtype=float), self.y)
        return w[:, None, None] * self.X[:, :, None] * self.X[:, None, :]

    def third_derivatives(self, theta):
        """Per-factor third-derivative tensors, shape ``(m, d, d, d)``."""
        w = self._d3f(self.X @ np.asarray(theta, dtype=float), self.y)
        X = self.X
        return (w[:, None, None, None] * X[:, :, None, None]
                * X[:, None, :, None] * X[:, None, None, :])

    def factor_potential(self, i, theta):
        z = float(self.X[i] @ theta)
        return float(self._f(np.array([z]), self.y[i:i + 1])[0])

    def factor_gradient(self, i, theta):
        z = float(self.X[i] @ theta)
        return float(self._df(np.array([z]), self.y[i:i + 1])[0]) * self.X[i]

    def factor_hessian(self, i, theta):
        z = float(self.X[i] @ theta)
        w = float(self._d2f(np.array([z]), self.y[i:i + 1])[0])
        return w * np.outer(self.X[i], self.X[i])

    def gradient(self, theta):
        return self.X.T @ self._df(self.X @ np.asarray(theta, dtype=float), self.y)

    def hessian(self, theta):
        w = self._d2f(self.X @ np.asarray(theta, dtype=float), self.y)
        return (self.X * w[:, None]).T @ self.X

    def potential_batch(self, thetas):
        Z = self.X @ np.atleast_2d(thetas).T
        return self._f(Z, self.y[:, None]).sum(axis=0)

    def gradient_subset(self, idx, theta):
        Xs = self.X[idx]
        return Xs.T @ self._df(Xs @ np.asarray(theta, dtype=float), self.y[idx])

    def ubar(self, order):
        if order not in self._ubar:
            raise ValueError(f"bounds are available for orders 1-3, not {order}")
        return self._ubar[order]


def _softplus(z):
    return np.log1p(np.exp(-np.abs(z))) + np.maximum(z, 0.0)


class LogisticModel(GLMModel):
    """Bayesian logistic regression with a flat prior, one factor per datum."""

    core_code = 0

    def __init__(self, data: Dataset):
        y = data.responses
        bad = np.flatnonzero((y != 0.0) & (y != 1.0))
        if bad.size:
            raise DataError(
                f"logistic responses must be 0/1; response {int(bad[0])} is {float(y[bad[0]])}")
        super().__init__(data)

    def _f(self, z, y):
        return _softplus(z) - y * z

    def _df(self, z, y):
        return expit(z) - y

    def _d2f(self, z, y):
        s = expit(z)
        return s * (1.0 - s)

    def _d3f(self, z, y):
        s = expit(z)
        return s * (1.0 - s) * (1.0 - 2.0 * s)

    def _derivative_sup(self, order):
        # sup|s - y| = 1, sup|s(1-s)| = 1/4, sup|s(1-s)(1-2s)| = 1/(6 sqrt 3)
        return {1: 1.0, 2: 0.25, 3: 1.0 / (6.0 * math.sqrt(3.0))}[order]


class RobustRegressionModel(GLMModel):
    """Linear regression with Student-t residuals and a flat prior."""

    core_code = 1

    def __init__(self, data: Dataset, nu: float = 4.0):
        if not nu > 0:
            raise DataError(f"degrees of freedom must be positive, got {nu}")
        self.nu = float(nu)
        super().__init__(data)

    def _f(self, z, y):
        r = y - z
        return 0.5 * (self.nu + 1.0) * np.log1p(r * r / self.nu)

    def _df(self, z, y):
        r = y - z
        return -(self.nu + 1.0) * r / (self.nu + r * r)

    def _d2f(self, z, y):
        r2 = (y - z) ** 2
        return (self.nu + 1.0) * (self.nu - r2) / (self.nu + r2) ** 2

    def _d3f(self, z, y):
        r = y - z
        return 2.0 * (self.nu + 1.0) * r * (3.0 * self.nu - r * r) / (self.nu + r * r) ** 3

    def _derivative_sup(self, order):
        nu = self.nu
        return {
            1: (nu + 1.0) / (2.0 * math.sqrt(nu)),
            2: (nu + 1.0) / nu,
            3: (nu + 1.0) * (3.0 + 2.0 * math.sqrt(2.0)) / (4.0 * nu ** 1.5),
        }[order]


class GaussianPrior(FactorModel):
    """Single isotropic Gaussian factor, usable as an extra prior factor.

    Its Hessian is constant, so ``ubar(2) = 1/scale**2`` and
    ``ubar(3) = 0``; the gradient is unbounded, so ``ubar(1) = inf``.
    """

    def __init__(self, d: int, scale: float = 1.0, mean=None):
        if not scale > 0:
            raise ValueError("prior scale must be positive")
        self.m, self.d = 1, int(d)
        self.scale = float(scale)
        self.mean = np.zeros(self.d) if mean is None else np.asarray(mean, dtype=float)

    def potentials(self, theta):
        r = np.asarray(theta, dtype=float) - self.mean
        return np.array([0.5 * float(r @ r) / self.scale ** 2])

    def gradients(self, theta):
        return ((np.asarray(theta, dtype=float) - self.mean) / self.scale ** 2)[None, :]

    def hessians(self, theta):
        return (np.eye(self.d) / self.scale ** 2)[None, :, :]

    def ubar(self, order):
        return np.array([{1: np.inf, 2: 1.0 / self.scale ** 2, 3: 0.0}[order]])


class StackedModel(FactorModel):
    """Concatenation of the factors of several models over the same ``theta``."""

    def __init__(self, *parts: FactorModel):
        if not parts:
            raise ValueError("need at least one model")
        dims = {p.d for p in parts}
        if len(dims) != 1:
            raise ValueError(f"parameter dimensions differ: {sorted(dims)}")
        self.parts = parts
        self.d = parts[0].d
        self.m = sum(p.m for p in parts)
        self._offsets = np.cumsum([0] + [p.m for p in parts])

    def _locate(self, i):
        k = int(np.searchsorted(self._offsets, i, side="right")) - 1
        return self.parts[k], i - self._offsets[k]

    def potentials(self, theta):
        return np.concatenate([p.potentials(theta) for p in self.parts])

    def gradients(self, theta):
        return np.concatenate([p.gradients(theta) for p in self.parts])

    def hessians(self, theta):
        return np.concatenate([p.hessians(theta) for p in self.parts])

    def ubar(self, order):
        return np.concatenate([p.ubar(order) for p in self.parts])

    def factor_potential(self, i, theta):
        part, j = self._locate(i)
        return part.factor_potential(j, theta)

    def factor_gradient(self, i, theta):
        part, j = self._locate(i)
        return part.factor_gradient(j, theta)

    def potential(self, theta):
        return sum(p.potential(theta) for p in self.parts)

    def gradient(self, theta):
        return sum(p.gradient(theta) for p in self.parts)

    def hessian(self, theta):
        return sum(p.hessian(theta) for p in self.parts)

    def potential_batch(self, thetas):
        return sum(p.potential_batch(thetas) for p in self.parts)


def build_logistic_model(data: Dataset) -> LogisticModel:
    return LogisticModel(data)


def build_robust_regression_model(data: Dataset, nu: float = 4.0) -> RobustRegressionModel:
    return RobustRegressionModel(data, nu)


def build_model(data: Dataset, kind: ModelKind) -> GLMModel:
    if isinstance(kind, LogisticRegression):
        return LogisticModel(data)
    if isinstance(kind, RobustLinearRegression):
        return RobustRegressionModel(data, kind.nu)
    raise TypeError(f"unknown model kind {kind!r}")


def generate_synthetic(n: int, d: int, kind: ModelKind, seed=None) -> Dataset:
    """Synthetic regression data with standard normal covariates.

    Robust regression responses are ``sum_j X_ij + eps`` with standard
    normal noise.  Logistic responses are Bernoulli draws from the model at
    ``theta = (1, ..., 1)``.  ``seed`` may be anything accepted by
    :func:`numpy.random.default_rng`.
    """
    if n < 1 or d < 1:
        raise DataError("n and d must be at least 1")
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, d))
    z = X.sum(axis=1)
    if isinstance(kind, RobustLinearRegression):
        y = z + rng.standard_normal(n)
    elif isinstance(kind, LogisticRegression):
        y = (rng.random(n) < expit(z)).astype(float)
    else:
        raise TypeError(f"unknown model kind {kind!r}")
    return Dataset(X, y)


def load_csv(path) -> Dataset:
    """Read a numeric CSV whose last column is the response.

    A first line that does not parse as numbers is treated as a header.
    """
    rows = []
    width = None
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                values = [float(c) for c in row]
            except ValueError:
                if lineno == 1:
                    continue
                raise DataError(f"{path}, line {lineno}: non-numeric cell in {row!r}") from None
            if width is None:
                width = len(values)
                if width < 2:
                    raise DataError(f"{path}, line {lineno}: need at least one covariate and a response")
            elif len(values) != width:
                raise DataError(
                    f"{path}, line {lineno}: expected {width} columns, found {len(values)}")
            rows.append(values)
    if not rows:
        raise DataError(f"{path}: no data rows")
    arr = np.asarray(rows)
    return Dataset(arr[:, :-1], arr[:, -1])
