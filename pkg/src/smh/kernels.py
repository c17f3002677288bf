"""Transition kernels and the chain runner.

Two interchangeable backends execute the chain loop: the compiled
``smh._core`` extension (built-in GLM models only) and a pure-Python loop
over the evaluators in :mod:`smh.acceptance`.  Both consume the random
stream identically.  The backend is chosen per call; ``SMH_BACKEND=python``
forces the fallback globally.
"""
from __future__ import annotations

import math
import os
import time
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

from . import acceptance as acc
from .acceptance import LipschitzBound
from .models import FactorModel, GLMModel
from .proposals import GaussianProposal
from .surrogate import TaylorSurrogate

try:
    from . import _core
except ImportError:  # extension not built
    _core = None

KINDS = ("mh", "smh", "fmh_naive")
_KIND_CODE = {"mh": 0, "smh": 1, "fmh_naive": 2}


def available_backends() -> tuple[str, ...]:
    return ("compiled", "python") if _core is not None else ("python",)


def default_backend() -> str:
    env = os.environ.get("SMH_BACKEND", "").strip().lower()
    if env in ("python", "compiled"):
        return env if env in available_backends() else "python"
    return available_backends()[0]


def _supports_compiled(model: FactorModel) -> bool:
    return isinstance(model, GLMModel) and model.core_code is not None


def resolve_backend(model: FactorModel, backend: Optional[str] = None) -> str:
    if backend is None:
        backend = default_backend()
        if backend == "compiled" and not _supports_compiled(model):
            backend = "python"
        return backend
    if backend not in ("compiled", "python"):
        raise ValueError(f"unknown backend {backend!r}")
    if backend == "compiled":
        if _core is None:
            raise RuntimeError("compiled extension smh._core is not available")
        if not _supports_compiled(model):
            raise ValueError(f"{type(model).__name__} has no compiled kernel")
    return backend


@dataclass(frozen=True)
class KernelConfig:
    kind: str = "smh"
    order: int = 2
    R: float = math.inf
    iterations: int = 10_000
    burn_in: Optional[int] = None
    thin: int = 1
    seed: Any = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kernel kind must be one of {KINDS}, got {self.kind!r}")
        if self.order not in (1, 2):
            raise ValueError(f"order must be 1 or 2, got {self.order}")
        if not self.R >= 0:
            raise ValueError(f"truncation threshold must lie in [0, inf], got {self.R}")
        if self.burn_in is None:
            object.__setattr__(self, "burn_in", self.iterations // 10)
        if self.burn_in < 0 or self.iterations <= self.burn_in:
            raise ValueError("need iterations > burn_in >= 0")
        if self.thin < 1:
            raise ValueError("thin must be at least 1")

    @property
    def label(self) -> str:
        if self.kind == "mh":
            return "MH"
        if self.kind == "fmh_naive":
            return "FMH-naive"
        return f"SMH-{self.order}"


@dataclass
class ChainTrace:
    states: np.ndarray          # (L, d), post burn-in and thinned
    accepted: np.ndarray        # (L,) bool
    evals: np.ndarray           # (L,) factor evaluations per iteration
    poisson: np.ndarray         # (L,) Poisson draw, -1 where none was drawn
    wall_time: float
    backend: str = "python"
    config: Optional[KernelConfig] = field(default=None, repr=False)

    def __len__(self):
        return self.states.shape[0]

    @property
    def acceptance_rate(self) -> float:
        return float(self.accepted.mean()) if len(self) else math.nan

    @property
    def mean_evals(self) -> float:
        return float(self.evals.mean()) if len(self) else math.nan


def _engine(model: GLMModel, bound, proposal: GaussianProposal, kind: str, R: float):
    d = model.d
    nu = getattr(model, "nu", 0.0)
    if isinstance(bound, TaylorSurrogate):
        s = bound
        taylor = dict(theta_hat=s.theta_hat, u_hat=s.values, G=s.grads,
                      Hf=s.hessians if s.order == 2 else np.zeros((1, 1, 1)),
                      g_tot=s.grad_total, H_tot=s.hess_total)
        order = s.order
        skip = proposal.skips_solitary(order)
    else:
        taylor = dict(theta_hat=np.zeros(d), u_hat=np.zeros(1), G=np.zeros((1, d)),
                      Hf=np.zeros((1, 1, 1)), g_tot=np.zeros(d), H_tot=np.zeros((d, d)))
        order = 1
        skip = False
    if bound is not None and bound.alias is not None:
        psi, Psi = bound.psi, bound.Psi
        aprob, aidx = bound.alias.prob, bound.alias.alias.astype(np.int64)
    else:
        psi, Psi = np.zeros(1), 0.0
        aprob, aidx = np.ones(1), np.zeros(1, dtype=np.int64)
    return _core.Engine(
        model.core_code, model.X, model.y, nu, _KIND_CODE[kind], order, R,
        taylor["theta_hat"], taylor["u_hat"], taylor["G"], taylor["Hf"],
        taylor["g_tot"], taylor["H_tot"], psi, Psi, aprob, aidx,
        proposal.A, proposal.b, proposal.chol, proposal.chol_inv,
        proposal.symmetric, skip)


def _run_python(model, bound, proposal, kind, R, theta0, n_iter, burn, thin, rng):
    n_keep = max(0, -(-(n_iter - burn) // thin))
    states = np.empty((n_keep, model.d))
    accepted = np.empty(n_keep, dtype=bool)
    evals = np.empty(n_keep, dtype=np.int64)
    poisson = np.empty(n_keep, dtype=np.int64)
    theta = np.array(theta0, dtype=float)
    row = 0
    for t in range(n_iter):
        theta_p = proposal.propose(theta, rng)
        if kind == "mh":
            out = acc.accept_mh(model, theta, theta_p, proposal, rng)
        else:
            out = acc.accept_tfmh(model, bound, theta, theta_p, R, proposal, rng)
        if out.accepted:
            theta = theta_p
        if t >= burn and (t - burn) % thin == 0:
            states[row] = theta
            accepted[row] = out.accepted
            evals[row] = out.evaluations
            poisson[row] = -1 if out.poisson_draw is None else out.poisson_draw
            row += 1
    return states, accepted, evals, poisson


def _execute(model, bound, proposal, config, theta0, backend):
    theta0 = np.array(theta0, dtype=float)
    if theta0.shape != (model.d,) or not np.all(np.isfinite(theta0)):
        raise ValueError(f"initial state must be a finite vector of length {model.d}")
    if proposal.d != model.d:
        raise ValueError("proposal and model dimensions differ")
    backend = resolve_backend(model, backend)
    rng = np.random.default_rng(config.seed)
    args = (theta0, config.iterations, config.burn_in, config.thin)
    start = time.perf_counter()
    if backend == "compiled":
        out = _engine(model, bound, proposal, config.kind, config.R).run(*args, rng)
    else:
        out = _run_python(model, bound, proposal, config.kind, config.R, *args, rng)
    wall = time.perf_counter() - start
    return ChainTrace(*out, wall_time=wall, backend=backend, config=config)


def run_chain(model: FactorModel, surrogate: Optional[TaylorSurrogate],
              proposal: GaussianProposal, config: KernelConfig, theta0,
              backend: Optional[str] = None) -> ChainTrace:
    """Run MH, truncated SMH-k, or naive FMH as selected by ``config.kind``.

    Rejected proposals repeat the current state in the trace.
    """
    if config.kind == "fmh_naive":
        return run_naive_fmh(model, proposal, config, theta0, backend=backend)
    if config.kind == "smh":
        if surrogate is None:
            raise ValueError("SMH needs a Taylor surrogate")
        if surrogate.order != config.order:
            raise ValueError(
                f"surrogate has order {surrogate.order} but the kernel expects {config.order}")
        if surrogate.m != model.m:
            raise ValueError("surrogate was built for a different model")
    return _execute(model, surrogate if config.kind == "smh" else None,
                    proposal, config, theta0, backend)


def run_naive_fmh(model: FactorModel, proposal: GaussianProposal, config: KernelConfig,
                  theta0, lipschitz=None, backend: Optional[str] = None) -> ChainTrace:
    """FMH on the per-datum factorisation with Lipschitz bounds (no control variates).

    ``lipschitz`` defaults to the model's first-derivative bounds.
    """
    if config.kind != "fmh_naive":
        config = KernelConfig("fmh_naive", config.order, config.R, config.iterations,
                              config.burn_in, config.thin, config.seed)
    bound = lipschitz if isinstance(lipschitz, LipschitzBound) else LipschitzBound(model, lipschitz)
    return _execute(model, bound, proposal, config, theta0, backend)


def acceptance_trials(model: FactorModel, bound, proposal: GaussianProposal, theta, theta_prime,
                      n: int, method: str = "poisson", rng=None,
                      backend: Optional[str] = None) -> tuple[int, int]:
    """Repeat one acceptance test ``n`` times without truncation.

    ``method`` is ``"poisson"`` (thinning) or ``"cascade"`` (one Bernoulli
    per factor).  Returns ``(accept count, total factor evaluations)``.
    """
    if method not in ("poisson", "cascade"):
        raise ValueError(f"unknown method {method!r}")
    rng = np.random.default_rng(rng)
    theta = np.asarray(theta, dtype=float)
    theta_prime = np.asarray(theta_prime, dtype=float)
    backend = resolve_backend(model, backend)
    if backend == "compiled":
        kind = "fmh_naive" if isinstance(bound, LipschitzBound) else "smh"
        eng = _engine(model, bound, proposal, kind, math.inf)
        return eng.trials(theta, theta_prime, n, method == "cascade", rng)
    sol = acc.solitary_log_ratio(bound, proposal, theta, theta_prime)
    accepts = total = 0
    for _ in range(n):
        if method == "cascade":
            out = acc.accept_fmh_cascade(model, bound, theta, theta_prime, rng, sol)
        else:
            out = acc.accept_smh_poisson(model, bound, theta, theta_prime, sol, rng)
        accepts += out.accepted
        total += out.evaluations
    return accepts, total
