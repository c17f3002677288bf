"""Taylor-expansion control variates and the separable bounds built on them.

Each factor potential ``U_i`` is replaced by its order-``k`` Taylor
polynomial around a fixed point ``theta_hat``.  The residual factor
``exp(-(U_i - Uhat_{k,i}))`` then has a log-ratio bounded by
``phi(theta, theta') * psi_i`` with

    phi(theta, theta') = |theta - theta_hat|_1^(k+1) + |theta' - theta_hat|_1^(k+1)
    psi_i = ubar(k+1, i) / (k+1)!

so the total bound ``lambda_bar = phi * Psi`` costs ``O(d)`` per evaluation
once ``Psi = sum_i psi_i`` has been precomputed.

Memory: per-factor gradients take ``8 m d`` bytes; for ``k = 2`` the dense
per-factor Hessians add ``8 m d^2`` bytes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .alias import AliasTable, build_alias
from .models import FactorModel


class SurrogateError(ArithmeticError):
    """Non-finite Taylor data at the expansion point."""


def _fsum_axis0(a: np.ndarray) -> np.ndarray:
    # correctly rounded column sums; m may reach 1e6 terms
    flat = a.reshape(a.shape[0], -1)
    out = np.array([math.fsum(flat[:, j]) for j in range(flat.shape[1])])
    return out.reshape(a.shape[1:])


@dataclass(frozen=True, eq=False)
class TaylorSurrogate:
    order: int
    theta_hat: np.ndarray
    values: np.ndarray              # U_i(theta_hat)
    grads: np.ndarray               # (m, d)
    hessians: Optional[np.ndarray]  # (m, d, d), second order only
    value_total: float
    grad_total: np.ndarray
    hess_total: np.ndarray          # kept for both orders; proposals need it
    psi: np.ndarray
    Psi: float
    alias: Optional[AliasTable]     # None when Psi == 0

    @property
    def m(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.theta_hat.shape[0]

    def factor_potential(self, i: int, theta) -> float:
        """``Uhat_{k,i}(theta)``."""
        delta = np.asarray(theta, dtype=float) - self.theta_hat
        val = self.values[i] + self.grads[i] @ delta
        if self.order == 2:
            val += 0.5 * delta @ self.hessians[i] @ delta
        return float(val)

    def factor_potentials(self, theta) -> np.ndarray:
        """``Uhat_{k,i}(theta)`` for every factor at once."""
        delta = np.asarray(theta, dtype=float) - self.theta_hat
        val = self.values + self.grads @ delta
        if self.order == 2:
            val = val + 0.5 * np.einsum("ijk,j,k->i", self.hessians, delta, delta)
        return val

    def total_offset(self, theta, order: Optional[int] = None) -> float:
        """``Uhat_k(theta) - U(theta_hat)``; O(d) or O(d^2), never O(m).

        ``order`` overrides the surrogate's own order; both aggregate
        derivatives are always stored.
        """
        order = self.order if order is None else order
        delta = np.asarray(theta, dtype=float) - self.theta_hat
        val = self.grad_total @ delta
        if order == 2:
            val += 0.5 * delta @ self.hess_total @ delta
        return float(val)

    def total_potential(self, theta) -> float:
        """``Uhat_k(theta) = sum_i Uhat_{k,i}(theta)``."""
        return self.value_total + self.total_offset(theta)

    def phi(self, theta, theta_prime) -> float:
        p = self.order + 1
        a = np.abs(np.asarray(theta, dtype=float) - self.theta_hat).sum()
        b = np.abs(np.asarray(theta_prime, dtype=float) - self.theta_hat).sum()
        # written as a sum of two terms so swapping the arguments is exact
        return float(a ** p + b ** p)

    def lambda_bar(self, theta, theta_prime) -> float:
        return self.phi(theta, theta_prime) * self.Psi

    def remainder(self, model: FactorModel, i: int, theta) -> float:
        """Taylor remainder ``U_i(theta) - Uhat_{k,i}(theta)``."""
        delta = np.asarray(theta, dtype=float) - self.theta_hat
        r = (model.factor_potential(i, theta) - self.values[i]) - self.grads[i] @ delta
        if self.order == 2:
            r -= 0.5 * delta @ self.hessians[i] @ delta
        return float(r)

    def remainders(self, model: FactorModel, theta) -> np.ndarray:
        delta = np.asarray(theta, dtype=float) - self.theta_hat
        r = (model.potentials(theta) - self.values) - self.grads @ delta
        if self.order == 2:
            r = r - 0.5 * np.einsum("ijk,j,k->i", self.hessians, delta, delta)
        return r

    def lambda_factor(self, model: FactorModel, i: int, theta, theta_prime) -> float:
        """Negative log of the ``i``-th residual acceptance factor."""
        return max(0.0, self.remainder(model, i, theta_prime) - self.remainder(model, i, theta))

    def lambda_factors(self, model: FactorModel, theta, theta_prime) -> np.ndarray:
        return np.maximum(
            0.0, self.remainders(model, theta_prime) - self.remainders(model, theta))


def build_surrogate(model: FactorModel, theta_hat, order: int) -> TaylorSurrogate:
    """Precompute everything the subsampled kernel needs, in one pass over the factors."""
    if order not in (1, 2):
        raise ValueError(f"surrogate order must be 1 or 2, got {order}")
    theta_hat = np.array(theta_hat, dtype=float)
    if theta_hat.shape != (model.d,):
        raise ValueError(f"expansion point must have shape ({model.d},), got {theta_hat.shape}")
    if not np.all(np.isfinite(theta_hat)):
        raise SurrogateError("expansion point is not finite")

    values = np.asarray(model.potentials(theta_hat), dtype=float)
    grads = np.asarray(model.gradients(theta_hat), dtype=float)
    hessians = np.asarray(model.hessians(theta_hat), dtype=float)
    for name, arr in (("potential", values), ("gradient", grads), ("Hessian", hessians)):
        bad = ~np.isfinite(arr.reshape(arr.shape[0], -1)).all(axis=1)
        if bad.any():
            raise SurrogateError(f"non-finite {name} at factor {int(np.flatnonzero(bad)[0])}")

    psi = np.asarray(model.ubar(order + 1), dtype=float) / math.factorial(order + 1)
    bad = ~np.isfinite(psi) | (psi < 0)
    if bad.any():
        raise SurrogateError(
            f"factor {int(np.flatnonzero(bad)[0])} has no finite order-{order + 1} bound")
    Psi = math.fsum(psi)
    hess_total = _fsum_axis0(hessians)
    hess_total = 0.5 * (hess_total + hess_total.T)

    arrays = dict(
        theta_hat=theta_hat,
        values=values,
        grads=np.ascontiguousarray(grads),
        hessians=np.ascontiguousarray(hessians) if order == 2 else None,
        grad_total=_fsum_axis0(grads),
        hess_total=hess_total,
        psi=psi,
    )
    for arr in arrays.values():
        if arr is not None:
            arr.setflags(write=False)
    return TaylorSurrogate(
        order=order,
        value_total=math.fsum(values),
        Psi=Psi,
        alias=build_alias(psi) if Psi > 0 else None,
        **arrays,
    )
