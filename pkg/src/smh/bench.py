"""Compiled versus pure-Python chain backends on one synthetic problem."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .kernels import KernelConfig, available_backends, run_chain
from .mode import find_mode
from .models import LogisticRegression, build_model, generate_synthetic
from .proposals import PCN, ScaledRW, make_proposal
from .surrogate import build_surrogate


@dataclass(frozen=True)
class BenchRow:
    kernel: str
    backend: str
    iterations: int
    seconds: float
    us_per_iter: float
    accept_rate: float
    mean_evals: float
    matches_reference: bool     # accept flags and eval counts equal the other backend's


def bench_backends(n: int = 4096, d: int = 10, iterations: int = 2000,
                   kernels: Sequence[str] = ("SMH-1", "SMH-2", "FMH-naive", "MH"),
                   seed: int = 0) -> list[BenchRow]:
    """Time every kernel on each available backend with identical seeds."""
    ss = np.random.SeedSequence(seed)
    data_ss, mode_ss, chain_ss = ss.spawn(3)
    kind = LogisticRegression()
    model = build_model(generate_synthetic(n, d, kind, seed=data_ss), kind)
    theta_hat = find_mode(model, rng=np.random.default_rng(mode_ss)).theta_hat
    surrogates = {k: build_surrogate(model, theta_hat, k) for k in (1, 2)}
    rows = []
    for label, cs in zip(kernels, chain_ss.spawn(len(kernels))):
        if label == "MH":
            cfg, prop_kind = KernelConfig("mh", 2, math.inf, iterations, 0), PCN(0.5)
        elif label == "FMH-naive":
            cfg, prop_kind = KernelConfig("fmh_naive", 1, math.inf, iterations, 0), ScaledRW(0.05)
        else:
            k = int(label[-1])
            cfg, prop_kind = KernelConfig("smh", k, float(n), iterations, 0), PCN(0.5)
        s = surrogates[cfg.order]
        prop = make_proposal(prop_kind, n, s)
        seed_int = int(cs.generate_state(1)[0])
        traces = {}
        for backend in available_backends():
            c = KernelConfig(cfg.kind, cfg.order, cfg.R, cfg.iterations, 0, 1, seed_int)
            traces[backend] = run_chain(model, s if c.kind == "smh" else None, prop, c,
                                        theta_hat, backend=backend)
        ref = traces[available_backends()[-1]]
        for backend, tr in traces.items():
            same = bool(np.array_equal(tr.accepted, ref.accepted)
                        and np.array_equal(tr.evals, ref.evals))
            rows.append(BenchRow(label, backend, iterations, tr.wall_time,
                                 1e6 * tr.wall_time / iterations, tr.acceptance_rate,
                                 tr.mean_evals, same))
    return rows
