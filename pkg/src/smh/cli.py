"""Command-line front end: ``smh {run,scaling,ess-vs-rho,mode,oracle,bench}``."""
from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .bench import bench_backends
from .config import ConfigError, RunConfig, load_config
from .diagnostics import (QuadratureError, batch_means_se, quadrature_posterior_oracle,
                          summarize)
from .experiments import StudyKernel, rho_study, scaling_study
from .kernels import run_chain
from .mode import DivergenceError, find_mode
from .models import DataError, build_model, generate_synthetic, load_csv
from .proposals import NotPositiveDefiniteError, make_proposal
from .surrogate import SurrogateError, build_surrogate
from .svg import Series, line_plot

log = logging.getLogger("smh")

_ERRORS = (ConfigError, DataError, ValueError, OSError, QuadratureError, DivergenceError,
           SurrogateError, NotPositiveDefiniteError, ArithmeticError)


def fmt(v) -> str:
    """Full-precision text for a CSV cell; floats round-trip exactly."""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % v
    return str(v)


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def _streams(cfg: RunConfig):
    data_ss, mode_ss, chain_ss = np.random.SeedSequence(cfg.seed).spawn(3)
    return data_ss, mode_ss, chain_ss


def _load_problem(cfg: RunConfig):
    data_ss, mode_ss, chain_ss = _streams(cfg)
    if cfg.data is not None:
        data = load_csv(cfg.data)
    else:
        data = generate_synthetic(cfg.n, cfg.d, cfg.model_kind, seed=data_ss)
    model = build_model(data, cfg.model_kind)
    mode = find_mode(model, rng=np.random.default_rng(mode_ss))
    return model, mode, chain_ss


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _chain(cfg: RunConfig, model, mode, chain_ss):
    kc = cfg.kernel_config(n=model.m, seed=chain_ss)
    surrogate = build_surrogate(model, mode.theta_hat, kc.order)
    proposal = make_proposal(cfg.proposal_kind(), model.m, surrogate)
    return run_chain(model, surrogate if kc.kind == "smh" else None, proposal, kc,
                     mode.theta_hat, backend=cfg.backend)


def cmd_run(cfg: RunConfig) -> int:
    model, mode, chain_ss = _load_problem(cfg)
    trace = _chain(cfg, model, mode, chain_ss)
    out = _out_dir(cfg)
    d = model.d
    kc = trace.config
    iters = kc.burn_in + kc.thin * np.arange(len(trace))
    write_csv(out / "trace.csv",
              ["iter", *[f"theta_{j + 1}" for j in range(d)], "accepted", "evals", "poisson_n"],
              ([int(t), *s, a, e, p] for t, s, a, e, p in
               zip(iters, trace.states, trace.accepted, trace.evals, trace.poisson)))
    if len(trace) >= 100:
        sm = summarize(trace)
        ess, eps = sm.ess, sm.ess_per_second
    else:
        log.warning("fewer than 100 retained states; ESS columns left as nan")
        ess = eps = np.full(d, math.nan)
    write_csv(out / "summary.csv",
              [*[f"ess_{j + 1}" for j in range(d)], *[f"ess_per_sec_{j + 1}" for j in range(d)],
               "accept_rate", "mean_evals", "wall_seconds"],
              [[*ess, *eps, trace.acceptance_rate, trace.mean_evals, trace.wall_time]])
    print(f"{kc.label} [{trace.backend}] n={model.m} accept={trace.acceptance_rate:.4f} "
          f"mean_evals={trace.mean_evals:.4g} wall={trace.wall_time:.3g}s -> {out}")
    return 0


def _study_kernels(cfg: RunConfig) -> list[StudyKernel]:
    ks = []
    for label in cfg.kernels:
        kc = cfg.kernel_config(label, n=1)
        ks.append(StudyKernel(kc, cfg.proposal_kind(), label,
                              truncate_at_n=(cfg.R == "n" and kc.kind == "smh")))
    return ks


def cmd_scaling(cfg: RunConfig) -> int:
    res = scaling_study(cfg.model_kind, _study_kernels(cfg), cfg.n_grid,
                        repetitions=cfg.repetitions, seed=cfg.seed, d=cfg.d,
                        threads=cfg.threads, backend=cfg.backend)
    out = _out_dir(cfg)
    rows = []
    for k, label in enumerate(res.labels):
        fit = res.fits[label]
        for i, n in enumerate(res.n_grid):
            last = i == len(res.n_grid) - 1
            rows.append([int(n), label, res.mean_evals[k, i], res.accept_rate[k, i],
                         fit.slope if last else ""])
    write_csv(out / "scaling.csv", ["n", "kernel", "mean_evals", "accept_rate", "slope"], rows)
    series = [Series(lab, res.n_grid.tolist(), res.mean_evals[k].tolist())
              for k, lab in enumerate(res.labels)]
    (out / "scaling.svg").write_text(line_plot(
        series, "Likelihood evaluations per iteration", "n", "mean evaluations",
        logx=True, logy=True))
    for label in res.labels:
        fit = res.fits[label]
        note = " (smallest n dropped)" if fit.dropped_first else ""
        print(f"{label}: slope {fit.slope:.3f} +- {fit.stderr:.3f}{note}")
    return 0


def cmd_ess_vs_rho(cfg: RunConfig) -> int:
    order = 1 if cfg.kernel == "SMH-1" else 2
    R = None if cfg.R == "n" else cfg.resolve_R(0)
    rows = rho_study(cfg.model_kind, cfg.n_grid, cfg.rho_grid, iterations=cfg.iterations,
                     seed=cfg.seed, d=cfg.d, order=order, R=R, threads=cfg.threads,
                     backend=cfg.backend)
    out = _out_dir(cfg)
    write_csv(out / "rho.csv", ["n", "rho", "ess_1", "ess_per_sec_1", "accept_rate", "mean_evals"],
              [[r.n, r.rho, r.ess, r.ess_per_sec, r.accept_rate, r.mean_evals] for r in rows])
    series = []
    for rho in cfg.rho_grid:
        sel = [r for r in rows if r.rho == float(rho)]
        series.append(Series(f"rho={rho:g}", [r.n for r in sel], [r.ess_per_sec for r in sel]))
    (out / "rho.svg").write_text(line_plot(
        series, "ESS per second of the first coordinate", "n", "ESS / s",
        logx=True, logy=True))
    acc = [Series(f"rho={rho:g}", [r.n for r in rows if r.rho == float(rho)],
                  [r.accept_rate for r in rows if r.rho == float(rho)]) for rho in cfg.rho_grid]
    (out / "rho_accept.svg").write_text(line_plot(
        acc, "Acceptance rate under pCN", "n", "acceptance rate", logx=True))
    for r in rows:
        print(f"n={r.n} rho={r.rho:g} accept={r.accept_rate:.4f} ess/s={r.ess_per_sec:.4g}")
    return 0


def cmd_mode(cfg: RunConfig) -> int:
    model, mode, _ = _load_problem(cfg)
    out = _out_dir(cfg)
    write_csv(out / "mode.csv", ["coordinate", "theta_hat"],
              [[j + 1, v] for j, v in enumerate(mode.theta_hat)])
    print(f"theta_hat = {np.array2string(mode.theta_hat, precision=6)}")
    print(f"|grad U| = {mode.grad_norm:.3g}, Hessian positive definite: {mode.hessian_pd}")
    return 0


def cmd_oracle(cfg: RunConfig) -> int:
    model, mode, chain_ss = _load_problem(cfg)
    if model.d > 2:
        raise ConfigError("the quadrature oracle needs d <= 2")
    if not mode.hessian_pd:
        raise QuadratureError("Hessian at the mode is not positive definite")
    scale = np.sqrt(np.diag(np.linalg.inv(mode.hessian)))
    q = quadrature_posterior_oracle(model, mode.theta_hat, scale, width=cfg.width)
    trace = _chain(cfg, model, mode, chain_ss)
    rows = []
    for j in range(model.d):
        x = trace.states[:, j]
        mu = float(x.mean())
        var = float(((x - mu) ** 2).mean())
        se_m = batch_means_se(x)
        se_v = batch_means_se((x - mu) ** 2)
        for name, o, c, se in ((f"mean_{j + 1}", q.mean[j], mu, se_m),
                               (f"var_{j + 1}", q.cov[j, j], var, se_v)):
            rows.append([name, o, c, se, (c - o) / se if se > 0 else math.nan])
    write_csv(_out_dir(cfg) / "oracle.csv", ["quantity", "oracle", "chain", "se", "z"], rows)
    worst = max(abs(r[4]) for r in rows)
    for r in rows:
        print(f"{r[0]}: oracle {r[1]:.6g} chain {r[2]:.6g} z={r[4]:+.2f}")
    return 0 if worst <= 3 else 1


def cmd_bench(cfg: RunConfig) -> int:
    rows = bench_backends(n=cfg.n, d=cfg.d, iterations=cfg.iterations, seed=cfg.seed)
    write_csv(_out_dir(cfg) / "bench.csv",
              ["kernel", "backend", "iterations", "seconds", "us_per_iter", "accept_rate",
               "mean_evals", "matches_reference"],
              [[r.kernel, r.backend, r.iterations, r.seconds, r.us_per_iter, r.accept_rate,
                r.mean_evals, r.matches_reference] for r in rows])
    for r in rows:
        print(f"{r.kernel:10s} {r.backend:9s} {r.us_per_iter:12.2f} us/iter  "
              f"identical={r.matches_reference}")
    return 0


COMMANDS = {
    "run": (cmd_run, "run one chain; writes trace.csv and summary.csv"),
    "scaling": (cmd_scaling, "evaluations per iteration across n; writes scaling.csv/.svg"),
    "ess-vs-rho": (cmd_ess_vs_rho, "pCN rho sweep; writes rho.csv/.svg"),
    "mode": (cmd_mode, "locate theta_hat; writes mode.csv"),
    "oracle": (cmd_oracle, "compare a chain against quadrature (d <= 2); writes oracle.csv"),
    "bench": (cmd_bench, "time compiled and Python backends; writes bench.csv"),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="key = value configuration file")
    common.add_argument("--seed", type=int, metavar="U64", help="master random seed")
    common.add_argument("--out", metavar="DIR", help="output directory")
    common.add_argument("--threads", type=int, metavar="N", help="worker threads for studies")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override one configuration key (repeatable)")
    common.add_argument("-v", "--verbose", action="store_true")
    parser = argparse.ArgumentParser(
        prog="smh", description="Scalable Metropolis-Hastings experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=help_text, description=help_text)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        cfg = load_config(args.config, args.set, seed=args.seed, out=args.out,
                          threads=args.threads)
        return COMMANDS[args.command][0](cfg)
    except _ERRORS as exc:
        print(f"smh {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
