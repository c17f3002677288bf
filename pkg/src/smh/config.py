"""Run configuration: a flat ``key = value`` file (TOML subset) plus overrides."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any, Optional

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .kernels import KernelConfig
from .models import LogisticRegression, ModelKind, RobustLinearRegression
from .proposals import PCN, FirstOrderReversible, PreconditionedRW, ProposalKind, ScaledRW


class ConfigError(ValueError):
    pass


KERNELS = ("MH", "SMH-1", "SMH-2", "FMH-naive")
PROPOSALS = ("pcn", "rw", "precond", "first-order")


@dataclass(frozen=True)
class RunConfig:
    model: str = "logistic"
    nu: float = 4.0
    n: int = 1000
    d: int = 10
    data: Optional[str] = None              # CSV path; synthetic data when unset
    kernel: str = "SMH-2"
    R: Any = "n"                            # "n", "inf", or a number
    proposal: str = "pcn"
    sigma: float = 1.0
    rho: float = 0.0
    iterations: int = 10_000
    burn_in: Optional[int] = None
    thin: int = 1
    seed: int = 0
    out: str = "."
    threads: int = 1
    n_grid: tuple = (1024, 4096, 16384, 65536)
    kernels: tuple = ("MH", "SMH-1", "SMH-2")
    repetitions: int = 3
    rho_grid: tuple = (0.0, 0.25, 0.5, 0.75)
    backend: Optional[str] = None
    width: float = 10.0                     # oracle box half-width in posterior scales

    def __post_init__(self):
        for name in ("n", "d", "iterations", "thin", "seed", "threads", "repetitions"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, int):
                raise ConfigError(f"{name} must be an integer, got {v!r}")
        if self.burn_in is not None and (isinstance(self.burn_in, bool)
                                         or not isinstance(self.burn_in, int)):
            raise ConfigError(f"burn_in must be an integer, got {self.burn_in!r}")
        for name in ("nu", "sigma", "rho", "width"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ConfigError(f"{name} must be a number, got {v!r}")
        if not all(isinstance(v, int) and v > 0 for v in self.n_grid):
            raise ConfigError("n_grid must hold positive integers")
        if not all(isinstance(v, (int, float)) for v in self.rho_grid):
            raise ConfigError("rho_grid must hold numbers")
        if self.model not in ("logistic", "robust"):
            raise ConfigError(f"model must be 'logistic' or 'robust', got {self.model!r}")
        if self.kernel not in KERNELS:
            raise ConfigError(f"kernel must be one of {KERNELS}, got {self.kernel!r}")
        for k in self.kernels:
            if k not in KERNELS:
                raise ConfigError(f"kernels entries must be among {KERNELS}, got {k!r}")
        if self.proposal not in PROPOSALS:
            raise ConfigError(f"proposal must be one of {PROPOSALS}, got {self.proposal!r}")
        if self.n < 1 or self.d < 1:
            raise ConfigError("n and d must be positive")
        if not self.sigma > 0:
            raise ConfigError("sigma must be positive")
        if not 0.0 <= self.rho < 1.0:
            raise ConfigError("rho must lie in [0, 1)")
        if any(not 0.0 <= r < 1.0 for r in self.rho_grid):
            raise ConfigError("rho_grid values must lie in [0, 1)")
        if self.iterations < 1 or self.thin < 1 or self.threads < 1 or self.repetitions < 1:
            raise ConfigError("iterations, thin, threads and repetitions must be positive")
        if self.burn_in is not None and not 0 <= self.burn_in < self.iterations:
            raise ConfigError("need 0 <= burn_in < iterations")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if self.data is not None and not Path(self.data).is_file():
            raise ConfigError(f"data file {self.data!r} does not exist")
        if self.backend not in (None, "compiled", "python"):
            raise ConfigError("backend must be 'compiled' or 'python'")
        self.resolve_R(1)

    @property
    def model_kind(self) -> ModelKind:
        return LogisticRegression() if self.model == "logistic" else RobustLinearRegression(self.nu)

    def resolve_R(self, n: int) -> float:
        R = self.R
        if isinstance(R, str):
            if R == "n":
                return float(n)
            if R in ("inf", "infinity"):
                return math.inf
            raise ConfigError(f"R must be 'n', 'inf' or a number, got {R!r}")
        if not R >= 0:
            raise ConfigError("R must be nonnegative")
        return float(R)

    def proposal_kind(self) -> ProposalKind:
        return {
            "pcn": lambda: PCN(self.rho),
            "rw": lambda: ScaledRW(self.sigma),
            "precond": lambda: PreconditionedRW(self.sigma),
            "first-order": lambda: FirstOrderReversible(self.sigma),
        }[self.proposal]()

    def kernel_config(self, label: Optional[str] = None, n: Optional[int] = None,
                      seed=None) -> KernelConfig:
        label = label or self.kernel
        R = self.resolve_R(self.n if n is None else n)
        if label == "MH":
            kind, order = "mh", 2
        elif label == "FMH-naive":
            kind, order = "fmh_naive", 1
        else:
            kind, order = "smh", int(label[-1])
        return KernelConfig(kind, order, R, self.iterations, self.burn_in, self.thin, seed)


_TUPLE_KEYS = {f.name for f in fields(RunConfig) if f.type == "tuple"}
_KEYS = {f.name for f in fields(RunConfig)}


def _coerce(key: str, value):
    if key in _TUPLE_KEYS:
        if not isinstance(value, (list, tuple)):
            value = [value]
        return tuple(value)
    return value


def parse_assignments(text: str, source: str = "<config>") -> dict:
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{source}: {exc}") from None
    for key, value in raw.items():
        if key not in _KEYS:
            raise ConfigError(f"{source}: unknown key {key!r}")
        if isinstance(value, dict):
            raise ConfigError(f"{source}: tables are not supported ({key!r})")
    return {k: _coerce(k, v) for k, v in raw.items()}


def load_config(path=None, overrides: Optional[list[str]] = None, **flags) -> RunConfig:
    """Build a :class:`RunConfig` from a file, ``key=value`` overrides, then flags."""
    values: dict = {}
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file {str(p)!r} does not exist")
        values.update(parse_assignments(p.read_text(), str(p)))
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, val = item.split("=", 1)
        key, val = key.strip(), val.strip()
        try:
            values.update(parse_assignments(f"{key} = {val}", "--set"))
        except ConfigError:
            # bare strings are accepted without quotes
            values.update(parse_assignments(f"{key} = {json.dumps(val)}", "--set"))
    values.update({k: v for k, v in flags.items() if v is not None})
    try:
        return RunConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None

