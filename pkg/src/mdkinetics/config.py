"""Run configuration: plain key = value files with strict key checking.

An empty file (or no file) yields the default setup: the standard parameter
table (beta_N=0.2, beta_D=0.1, beta_M=0.2, beta_C=0.1, sigma2_J=0.01,
gamma_M=gamma_C=0.05), initial variances 0.1, grid [0, 12] with 801 cells,
1e5 particles.  Two named presets fix the initial means: ``fig1`` =
(9, 1, 0.1, 0.5) for moment-level runs and ``sec41`` = (9, 1, 0.6, 0.6) for
distribution-level runs.  Noise amplitudes are configured as variances
(sigma2_J); anyone thinking in standard deviations should square first.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields as dc_fields
from pathlib import Path

from .params import ParameterSet, validate

PRESETS = {
    "fig1": (9.0, 1.0, 0.1, 0.5),
    "sec41": (9.0, 1.0, 0.6, 0.6),
}

DEFAULT_EPSILONS = (1e-3, 1e-2, 1e-1, 5e-1)
DEFAULT_P_EXPONENTS = (5 / 8, 3 / 4, 7 / 8)


class ConfigError(ValueError):
    """Malformed configuration file or constraint violation."""


@dataclass
class RunConfig:
    """Everything an experiment driver needs, with defaults for every field."""

    beta_N: float = 0.2
    beta_D: float = 0.1
    beta_M: float = 0.2
    beta_C: float = 0.1
    sigma2_N: float = 0.01
    sigma2_D: float = 0.01
    sigma2_M: float = 0.01
    sigma2_C: float = 0.01
    gamma_M: float = 0.05
    gamma_C: float = 0.05
    nu_control: float = 0.0
    epsilon: float = 1.0

    preset: str = "auto"
    m0_N: float | None = None
    m0_D: float | None = None
    m0_M: float | None = None
    m0_C: float | None = None
    v0_N: float = 0.1
    v0_D: float = 0.1
    v0_M: float = 0.1
    v0_C: float = 0.1

    L: float = 12.0
    n_x: int = 801
    n_particles: int = 100_000
    seed: int = 20250810
    dsmc_dt: float = 0.5
    ode_dt: float = 1e-2
    engine: str = "numba"

    epsilons: tuple[float, ...] = DEFAULT_EPSILONS
    p_exponents: tuple[float, ...] = DEFAULT_P_EXPONENTS
    horizon: float | None = None
    report_dt: float = 1.0
    out_dir: str = "out"

    def parameters(self) -> ParameterSet:
        return ParameterSet(
            beta_N=self.beta_N, beta_D=self.beta_D, beta_M=self.beta_M, beta_C=self.beta_C,
            sigma2_N=self.sigma2_N, sigma2_D=self.sigma2_D, sigma2_M=self.sigma2_M,
            sigma2_C=self.sigma2_C, gamma_M=self.gamma_M, gamma_C=self.gamma_C,
            nu_control=self.nu_control, epsilon=self.epsilon)

    def initial_means(self, default_preset: str) -> tuple[float, float, float, float]:
        """Preset means, overridden field-by-field by explicit m0_* keys."""
        name = default_preset if self.preset == "auto" else self.preset
        if name not in PRESETS:
            raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
        base = PRESETS[name]
        explicit = (self.m0_N, self.m0_D, self.m0_M, self.m0_C)
        return tuple(b if e is None else e for b, e in zip(base, explicit))

    def initial_variances(self) -> tuple[float, float, float, float]:
        return (self.v0_N, self.v0_D, self.v0_M, self.v0_C)


_FLOAT_LIST_KEYS = {"epsilons", "p_exponents"}
_INT_KEYS = {"n_x", "n_particles", "seed"}
_STR_KEYS = {"preset", "out_dir", "engine"}
_OPTIONAL_FLOAT_KEYS = {"m0_N", "m0_D", "m0_M", "m0_C", "horizon"}


def _known_keys() -> set[str]:
    return {f.name for f in dc_fields(RunConfig)}


def parse_config(path: str | Path | None) -> RunConfig:
    """Read a key = value file into a RunConfig.

    Lines starting with '#' and blank lines are ignored.  Unknown keys are
    rejected by name.  Parameter constraints are enforced via
    :func:`mdkinetics.params.validate`; any violation aborts parsing.
    """
    cfg = RunConfig()
    if path is not None:
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"config file not found: {p}")
        known = _known_keys()
        for lineno, raw in enumerate(p.read_text().splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{p}:{lineno}: expected 'key = value', got {raw!r}")
            key, value = (s.strip() for s in line.split("=", 1))
            if key not in known:
                raise ConfigError(f"{p}:{lineno}: unknown key {key!r}")
            try:
                setattr(cfg, key, _convert(key, value))
            except ValueError as exc:
                raise ConfigError(f"{p}:{lineno}: bad value for {key!r}: {exc}") from exc
    _check(cfg)
    return cfg


def _convert(key: str, value: str):
    if key in _STR_KEYS:
        return value
    if key in _INT_KEYS:
        return int(value)
    if key in _FLOAT_LIST_KEYS:
        items = [float(v) for v in value.replace(",", " ").split()]
        if not items:
            raise ValueError("empty list")
        return tuple(items)
    if key in _OPTIONAL_FLOAT_KEYS and value.lower() == "none":
        return None
    return float(value)


def _check(cfg: RunConfig) -> None:
    if not (0.0 < cfg.epsilon <= 1.0):
        raise ConfigError(f"epsilon = {cfg.epsilon} outside the admissible range (0, 1]")
    for e in cfg.epsilons:
        if not (0.0 < e <= 1.0):
            raise ConfigError(f"epsilons entry {e} outside the admissible range (0, 1]")
    for p in cfg.p_exponents:
        if not (0.5 < p < 1.0):
            raise ConfigError(f"p_exponents entry {p} outside the admissible range (1/2, 1)")
    if cfg.n_x < 2 or cfg.L <= 0:
        raise ConfigError("grid needs L > 0 and n_x >= 2")
    if cfg.n_particles < 1:
        raise ConfigError("n_particles must be at least 1")
    report = validate(cfg.parameters())
    if not report.ok:
        raise ConfigError(f"parameter constraints violated: {report}")
