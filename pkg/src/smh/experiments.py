"""Synthetic-data studies: evaluation-cost scaling in ``n`` and the pCN ``rho`` sweep.

Every (n, repetition) cell draws fresh data, locates the mode, builds the
surrogates and runs each kernel from ``theta_hat``.  All randomness in a
cell derives from ``SeedSequence(seed, spawn_key=(i, r))`` so results do
not depend on how cells are scheduled across threads.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Optional, Sequence, Union

import numpy as np

from .diagnostics import SlopeFit, ess, fit_loglog_slope
from .kernels import KernelConfig, run_chain
from .mode import ModeConfig, find_mode
from .models import ModelKind, build_model, generate_synthetic
from .proposals import PCN, ProposalKind, make_proposal
from .surrogate import build_surrogate


@dataclass(frozen=True)
class StudyKernel:
    """A kernel configuration paired with the proposal it runs under."""
    config: KernelConfig
    proposal: ProposalKind = PCN(0.5)
    label: Optional[str] = None
    truncate_at_n: bool = False     # use R = n in every cell, overriding config.R

    @property
    def name(self) -> str:
        return self.label or self.config.label


KernelLike = Union[StudyKernel, KernelConfig]


@dataclass(frozen=True)
class ScalingStudyResult:
    n_grid: np.ndarray
    labels: tuple[str, ...]
    mean_evals: np.ndarray          # (kernels, n) averaged over repetitions
    accept_rate: np.ndarray         # (kernels, n)
    raw_evals: np.ndarray           # (kernels, n, repetitions)
    raw_accept: np.ndarray          # (kernels, n, repetitions)
    fits: dict

    def slope(self, label: str) -> SlopeFit:
        return self.fits[label]


def _as_study_kernel(k: KernelLike, default_proposal: ProposalKind) -> StudyKernel:
    return k if isinstance(k, StudyKernel) else StudyKernel(k, default_proposal)


def _cell_streams(seed, i: int, r: int):
    root = np.random.SeedSequence(seed, spawn_key=(i, r))
    data_ss, mode_ss, chain_ss = root.spawn(3)
    return data_ss, mode_ss, chain_ss


def _prepare(kind: ModelKind, n: int, d: int, data_ss, mode_ss, mode_config):
    data = generate_synthetic(n, d, kind, seed=data_ss)
    model = build_model(data, kind)
    mode = find_mode(model, mode_config, rng=np.random.default_rng(mode_ss))
    return model, mode


def _run_cell(kind, kernels, n, d, seed, i, r, mode_config, backend):
    data_ss, mode_ss, chain_ss = _cell_streams(seed, i, r)
    model, mode = _prepare(kind, n, d, data_ss, mode_ss, mode_config)
    surrogates = {}
    out = []
    for sk, ss in zip(kernels, chain_ss.spawn(len(kernels))):
        order = sk.config.order
        if order not in surrogates:
            surrogates[order] = build_surrogate(model, mode.theta_hat, order)
        s = surrogates[order]
        prop = make_proposal(sk.proposal, n, s)
        cfg = replace(sk.config, seed=ss)
        if sk.truncate_at_n:
            cfg = replace(cfg, R=float(n))
        trace = run_chain(model, s if cfg.kind == "smh" else None, prop, cfg,
                          mode.theta_hat, backend=backend)
        out.append(trace)
    return out


def scaling_study(kind: ModelKind, kernels: Sequence[KernelLike], n_grid: Sequence[int],
                  repetitions: int = 3, seed=0, d: int = 10,
                  proposal: ProposalKind = PCN(0.5), threads: int = 1,
                  mode_config: Optional[ModeConfig] = None,
                  backend: Optional[str] = None) -> ScalingStudyResult:
    """Mean factor evaluations per iteration across a grid of data sizes.

    A log-log least-squares slope is fitted per kernel to the
    repetition-averaged means.
    """
    n_grid = np.asarray(n_grid, dtype=np.int64)
    if n_grid.size < 4:
        raise ValueError("scaling study needs at least four grid points")
    if np.any(np.diff(n_grid) <= 0):
        raise ValueError("n grid must be strictly increasing")
    if repetitions < 1:
        raise ValueError("need at least one repetition")
    ks = [_as_study_kernel(k, proposal) for k in kernels]
    cells = [(i, r) for i in range(n_grid.size) for r in range(repetitions)]

    def work(cell):
        i, r = cell
        return _run_cell(kind, ks, int(n_grid[i]), d, seed, i, r, mode_config, backend)

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        results = list(pool.map(work, cells))

    K, N = len(ks), n_grid.size
    raw_e = np.empty((K, N, repetitions))
    raw_a = np.empty((K, N, repetitions))
    for (i, r), traces in zip(cells, results):
        for k, tr in enumerate(traces):
            raw_e[k, i, r] = tr.mean_evals
            raw_a[k, i, r] = tr.acceptance_rate
    mean_e = raw_e.mean(axis=2)
    labels = tuple(k.name for k in ks)
    fits = {lab: fit_loglog_slope(n_grid, mean_e[k]) for k, lab in enumerate(labels)}
    return ScalingStudyResult(n_grid, labels, mean_e, raw_a.mean(axis=2), raw_e, raw_a, fits)


@dataclass(frozen=True)
class RhoStudyRow:
    n: int
    rho: float
    ess: float
    ess_per_sec: float
    accept_rate: float
    mean_evals: float


def rho_study(kind: ModelKind, n_grid: Sequence[int], rho_grid: Sequence[float],
              iterations: int = 10_000, seed=0, d: int = 10, order: int = 2,
              R: float = None, threads: int = 1,
              mode_config: Optional[ModeConfig] = None,
              backend: Optional[str] = None) -> list[RhoStudyRow]:
    """SMH-k with pCN(rho): ESS/sec of the first coordinate and acceptance per (n, rho).

    ``R`` defaults to ``n`` (truncation at the full-scan cost).
    """
    rho_grid = [float(r) for r in rho_grid]
    for rho in rho_grid:
        if not 0.0 <= rho < 1.0:
            raise ValueError(f"rho must lie in [0, 1), got {rho}")
    n_grid = [int(n) for n in n_grid]

    def work(i):
        n = n_grid[i]
        cfg = KernelConfig("smh", order, float(n) if R is None else R, iterations)
        ks = [StudyKernel(cfg, PCN(rho)) for rho in rho_grid]
        traces = _run_cell(kind, ks, n, d, seed, i, 0, mode_config, backend)
        rows = []
        for rho, tr in zip(rho_grid, traces):
            e = ess(tr.states[:, 0])
            rows.append(RhoStudyRow(n, rho, e, e / tr.wall_time,
                                    tr.acceptance_rate, tr.mean_evals))
        return rows

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        per_n = list(pool.map(work, range(len(n_grid))))
    return [row for rows in per_n for row in rows]
