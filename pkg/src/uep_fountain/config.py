"""Flat ``key = value`` run configuration.

One setting per line, ``#`` starts a comment, lists are comma-separated.
Every key maps to a ``RunConfig`` field; unknown keys are rejected. The
degree distribution is written ``raptor`` or as ``d:p`` pairs, e.g.
``omega = 1:0.1, 2:0.5, 3:0.4``.
"""
from __future__ import annotations

import dataclasses
import math
import typing
from dataclasses import dataclass, field
from pathlib import Path

from .broadcast_sim import GridPoint, ScalingTable, SourceConfig
from .channel import snr_db_to_sigma2
from .errors import ConfigError
from .source_model import MU_FLOOR
from .uep_design import (DEFAULT_D_MAX, EPS1_DEFAULT, EPS2_DEFAULT, LAMBDA_MAX, PSI_MC_SAMPLES,
                         DegreeDistribution)


@dataclass
class RunConfig:
    # source
    k: int = 256
    c: int = 1
    source: str = "synthetic"
    certainty_low: float = 0.5
    certainty_high: float = 4.0
    low_band: list = field(default_factory=lambda: [MU_FLOOR, 0.5])
    high_band: list = field(default_factory=lambda: [4.0, 6.0])
    high_fraction: float = 0.5
    mu_floor: float = MU_FLOOR
    # code
    d_max: int = DEFAULT_D_MAX
    omega: str = "raptor"
    stability: bool = True
    # design
    eps1: float = EPS1_DEFAULT
    eps2: float = EPS2_DEFAULT
    lambda_min: float = -LAMBDA_MAX
    lambda_max: float = LAMBDA_MAX
    lam: str = "auto"
    psi_target: float | None = None
    psi_mc_samples: int = PSI_MC_SAMPLES
    tune_tol: float = 1e-3
    design_sigma2: float | None = None
    design_lambda_grid: list = field(default_factory=lambda: [-8.0, -4.0, -2.0, -1.0, 0.0, 1.0, 2.0, 4.0, 8.0])
    # channel / receivers
    llr_cap: float = 30.0
    sigma2: list = field(default_factory=lambda: [0.5])
    snr_db: list | None = None
    alpha: list = field(default_factory=lambda: [0.0])
    beta: list = field(default_factory=lambda: [0.0])
    n_total: list | None = None
    eta: list | None = None
    alpha_knots: list = field(default_factory=lambda: [0.0, 4.0])
    gamma_values: list = field(default_factory=lambda: [2.0, 0.5])
    beta_knots: list = field(default_factory=lambda: [0.0, 16.0])
    eta_values: list = field(default_factory=lambda: [16.0, 1.0])
    allocation_mode: str = "entropy"
    max_symbols: int = 1 << 20
    trials: int = 100
    seed: int = 0
    # encode / decode
    encode_n: int | None = None
    decode_sigma2: float = 0.0
    decode_eta: float = 10.0
    source_path: str | None = None
    jobs: int = 1

    def __post_init__(self):
        self.validate()

    # ------------------------------------------------------------ validation

    def validate(self):
        if self.k < 1 or self.c < 1:
            raise ConfigError("k and c must be positive")
        if self.source not in ("synthetic", "bimodal"):
            raise ConfigError(f"source must be 'synthetic' or 'bimodal', got {self.source!r}")
        if not 0 < self.mu_floor:
            raise ConfigError("mu_floor must be positive")
        if not (self.mu_floor <= self.certainty_low <= self.certainty_high):
            raise ConfigError("need mu_floor <= certainty_low <= certainty_high")
        for band in (self.low_band, self.high_band):
            if len(band) != 2 or not (self.mu_floor <= band[0] <= band[1]):
                raise ConfigError(f"invalid certainty band {band}")
        if not 0 <= self.high_fraction <= 1:
            raise ConfigError("high_fraction must lie in [0, 1]")
        if not 1 <= self.d_max <= self.k:
            raise ConfigError(f"d_max={self.d_max} must lie in [1, k={self.k}]")
        if self.eps1 <= 0 or self.eps2 <= 0:
            raise ConfigError("eps1 and eps2 must be positive")
        if not self.lambda_min <= 0 <= self.lambda_max:
            raise ConfigError("lambda bracket must contain 0")
        if self.lam != "auto":
            try:
                float(self.lam)
            except ValueError:
                raise ConfigError(f"lam must be a number or 'auto', got {self.lam!r}") from None
        if self.psi_mc_samples < 1 or self.tune_tol <= 0:
            raise ConfigError("psi_mc_samples and tune_tol must be positive")
        if self.llr_cap <= 0:
            raise ConfigError("llr_cap must be positive")
        if self.snr_db is not None:
            self.sigma2 = [snr_db_to_sigma2(s) for s in self.snr_db]
            self.snr_db = None
        if not self.sigma2 or any(not (s > 0 and math.isfinite(s)) for s in self.sigma2):
            raise ConfigError("sigma2 entries must be positive and finite")
        if self.design_sigma2 is not None and not self.design_sigma2 > 0:
            raise ConfigError("design_sigma2 must be positive")
        if any(a < 0 for a in self.alpha) or any(b < 0 for b in self.beta):
            raise ConfigError("alpha and beta must be nonnegative")
        if self.eta is not None and any(e < 1 for e in self.eta):
            raise ConfigError("eta entries must be >= 1")
        if self.n_total is not None and any(n < 0 for n in self.n_total):
            raise ConfigError("n_total entries must be nonnegative")
        if self.allocation_mode not in ("entropy", "bits"):
            raise ConfigError("allocation_mode must be 'entropy' or 'bits'")
        if self.max_symbols < 0 or self.trials < 1 or self.jobs < 1:
            raise ConfigError("max_symbols >= 0, trials >= 1 and jobs >= 1 required")
        if not (self.decode_sigma2 >= 0):
            raise ConfigError("decode_sigma2 must be >= 0 (0 = noiseless, inf = erased)")
        if self.decode_eta < 1:
            raise ConfigError("decode_eta must be >= 1")
        if not 0 <= self.seed < 1 << 64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        self.scaling_table()
        self.degree_distribution()

    # ------------------------------------------------------------ builders

    def degree_distribution(self):
        if self.omega.strip().lower() == "raptor":
            return DegreeDistribution.raptor(self.d_max, stability=self.stability)
        probs = {}
        for item in self.omega.split(","):
            try:
                d, p = item.split(":")
                probs[int(d)] = float(p)
            except ValueError:
                raise ConfigError(f"cannot parse degree entry {item.strip()!r}; expected d:p") from None
        om = DegreeDistribution.from_dict(probs, stability=self.stability)
        if om.d_max > self.d_max:
            raise ConfigError(f"omega uses degree {om.d_max} above d_max={self.d_max}")
        return om

    def scaling_table(self):
        return ScalingTable(tuple(self.alpha_knots), tuple(self.gamma_values),
                            tuple(self.beta_knots), tuple(self.eta_values))

    def source_config(self):
        lam = "auto" if self.lam == "auto" else float(self.lam)
        return SourceConfig(
            k=self.k, c=self.c, certainty_low=self.certainty_low,
            certainty_high=self.certainty_high, bimodal=self.source == "bimodal",
            low_band=tuple(self.low_band), high_band=tuple(self.high_band),
            high_fraction=self.high_fraction, omega=self.degree_distribution(), lam=lam,
            design_sigma2=self.design_sigma2, eps1=self.eps1, eps2=self.eps2,
            psi_target=self.psi_target)

    def grid(self):
        ns = self.n_total if self.n_total is not None else [None]
        etas = self.eta if self.eta is not None else [None]
        return [GridPoint(s, a, b, None if n is None else int(n), e)
                for s in self.sigma2 for a in self.alpha for b in self.beta
                for n in ns for e in etas]


# ---------------------------------------------------------------- parsing

_NONE = {"", "none", "null"}


def _coerce(name, tp, raw):
    raw = raw.strip()
    origin = typing.get_origin(tp)
    args = typing.get_args(tp)
    optional = type(None) in args
    if optional:
        if raw.lower() in _NONE:
            return None
        tp = next(a for a in args if a is not type(None))
        origin = typing.get_origin(tp)
    try:
        if tp is bool:
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if tp is int:
            return int(raw, 0)
        if tp is float:
            return float(raw)
        if tp is str:
            return raw
        if tp is list or origin is list:
            return [float(x) for x in raw.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"config key {name!r}: cannot parse {raw!r}") from None
    raise ConfigError(f"config key {name!r}: unsupported type")


def _field_types():
    hints = typing.get_type_hints(RunConfig)
    return {f.name: hints[f.name] for f in dataclasses.fields(RunConfig)}


def parse_config_text(text, source="<config>"):
    types = _field_types()
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in types:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        values[key] = _coerce(key, types[key], val)
    return values


def load_config(path=None, **overrides):
    """Build a validated RunConfig from an optional file plus keyword overrides."""
    values = {}
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as e:
            raise ConfigError(f"cannot read config {path}: {e}") from None
        values = parse_config_text(text, str(path))
    types = _field_types()
    for key, val in overrides.items():
        if key not in types:
            raise ConfigError(f"unknown key {key!r}")
        values[key] = val
    return RunConfig(**values)
