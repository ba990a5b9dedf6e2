"""Experiment configuration: sectioned key=value files plus CLI overrides.

The format is INI (flat, diffable, language-neutral).  Exactly one of the
sections ``[dimensionless]`` / ``[physical]`` must be present; every other
section is optional and falls back to the documented defaults, which
reproduce the flagship kbar=1, lam=0.4 experiment.  Validation collects
every violated invariant before failing.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field
from pathlib import Path

from .units import (
    DimensionlessParams,
    PhysicalParams,
    to_dimensionless,
)

TWO_PI = 2.0 * math.pi


class ConfigError(ValueError):
    """One or more invalid or missing configuration entries."""

    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        super().__init__("invalid configuration:\n" + "\n".join(f"  - {p}" for p in problems))


@dataclass(frozen=True)
class InitialBlock:
    z0: float = 20.0
    p0: float = 0.0
    dz_width: float | None = None   # None -> sqrt(kbar)/2
    n_particles: int = 60000
    seed: int = 20260810

    def resolved_dz(self, kbar: float) -> float:
        return self.dz_width if self.dz_width is not None else math.sqrt(kbar) / 2.0


@dataclass(frozen=True)
class RunBlock:
    t_final: float = 1000.0
    dt: float = TWO_PI / 2000.0
    record_every: float = TWO_PI
    grid_zmin: float = -20.0
    grid_zmax: float = 500.0
    grid_points: int = 2**14
    absorber: bool = False
    absorber_fraction: float = 0.1


@dataclass(frozen=True)
class PoincareBlock:
    n_orbits: int = 32
    n_periods: int = 256
    z_seed_min: float = 2.0
    z_seed_max: float = 60.0


@dataclass(frozen=True)
class FloquetBlock:
    basis_dim: int = 300
    dt: float = TWO_PI / 1000.0
    grid_zmin: float = -16.0
    grid_zmax: float = 156.0
    grid_points: int = 1024


@dataclass(frozen=True)
class AnalysisBlock:
    n_max: int = 5
    fit_p_lo: float = 7.0        # exp-linear tail window (momentum)
    fit_p_hi: float = 20.0
    profile_p_lo: float = 1.0    # overall-shape window (momentum)
    profile_p_hi: float = 12.0
    default_half_width: float = 4.0
    measure_islands: bool = True  # off: use default_half_width for all windows


@dataclass(frozen=True)
class ExperimentConfig:
    params: DimensionlessParams
    physical: PhysicalParams | None = None
    initial: InitialBlock = InitialBlock()
    run: RunBlock = RunBlock()
    poincare: PoincareBlock = PoincareBlock()
    floquet: FloquetBlock = FloquetBlock()
    analysis: AnalysisBlock = AnalysisBlock()
    outdir: str = "out"

    def settings_dict(self) -> dict:
        """Flat mapping of every numeric setting, for run manifests."""
        out = {
            "params.v0": self.params.v0,
            "params.kappa": self.params.kappa,
            "params.lambda": self.params.lam,
            "params.kbar": self.params.kbar,
            "output.directory": self.outdir,
        }
        for name, block in (
            ("initial", self.initial),
            ("run", self.run),
            ("poincare", self.poincare),
            ("floquet", self.floquet),
            ("analysis", self.analysis),
        ):
            for key, val in vars(block).items():
                out[f"{name}.{key}"] = val
        return out


_SCHEMA: dict[str, dict[str, type]] = {
    "dimensionless": {"v0": float, "kappa": float, "lambda": float, "kbar": float},
    "physical": {
        "mass": float,
        "rabi_eff": float,
        "decay_wavenumber": float,
        "mod_frequency": float,
        "mod_amplitude_eps": float,
        "gravity": float,
        "hbar": float,
    },
    "initial": {"z0": float, "p0": float, "dz": float, "n_particles": int, "seed": int},
    "run": {
        "t_final": float,
        "dt": float,
        "record_every": float,
        "grid_zmin": float,
        "grid_zmax": float,
        "grid_points": int,
        "absorber": bool,
        "absorber_fraction": float,
    },
    "poincare": {"n_orbits": int, "n_periods": int, "z_seed_min": float, "z_seed_max": float},
    "floquet": {"basis_dim": int, "dt": float, "grid_zmin": float, "grid_zmax": float,
                "grid_points": int},
    "analysis": {"n_max": int, "fit_p_lo": float, "fit_p_hi": float,
                 "profile_p_lo": float, "profile_p_hi": float,
                 "default_half_width": float, "measure_islands": bool},
    "output": {"directory": str},
}

_REQUIRED = {
    "dimensionless": ("v0", "kappa", "lambda", "kbar"),
    "physical": ("mass", "rabi_eff", "decay_wavenumber", "mod_frequency",
                 "mod_amplitude_eps"),
}


def _parse_value(raw: str, typ: type, where: str, problems: list[str]):
    try:
        if typ is bool:
            low = raw.strip().lower()
            if low in ("true", "yes", "1", "on"):
                return True
            if low in ("false", "no", "0", "off"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if typ is int:
            return int(raw)
        if typ is float:
            return float(raw)
        return raw
    except ValueError as exc:
        problems.append(f"{where}: {exc}")
        return None


def parse_config(
    text: str, overrides: dict[str, str] | None = None
) -> ExperimentConfig:
    """Parse configuration text, apply overrides, validate everything."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError([f"parse error: {exc}"]) from exc

    problems: list[str] = []
    for key, val in (overrides or {}).items():
        if "." not in key:
            problems.append(f"override {key!r}: expected section.key=value")
            continue
        section, name = key.split(".", 1)
        if section not in _SCHEMA or name not in _SCHEMA[section]:
            problems.append(f"override {key!r}: unknown setting")
            continue
        if not cp.has_section(section):
            cp.add_section(section)
        cp.set(section, name, val)

    for section in cp.sections():
        if section not in _SCHEMA:
            problems.append(f"unknown section [{section}]")
            continue
        for name in cp.options(section):
            if name not in _SCHEMA[section]:
                problems.append(f"unknown key {name!r} in section [{section}]")

    has_dim = cp.has_section("dimensionless")
    has_phys = cp.has_section("physical")
    if has_dim == has_phys:
        problems.append(
            "exactly one of the sections [dimensionless] or [physical] is required"
        )
    typed: dict[str, dict] = {}
    for section, keys in _SCHEMA.items():
        if not cp.has_section(section):
            typed[section] = {}
            continue
        vals = {}
        for name, typ in keys.items():
            if cp.has_option(section, name):
                v = _parse_value(cp.get(section, name), typ, f"[{section}] {name}", problems)
                if v is not None:
                    vals[name] = v
        for name in _REQUIRED.get(section, ()):
            if not cp.has_option(section, name):
                problems.append(f"missing required key {name!r} in section [{section}]")
        typed[section] = vals

    if problems:
        raise ConfigError(problems)

    physical = None
    if has_phys:
        try:
            physical = PhysicalParams(**typed["physical"])
            params = to_dimensionless(physical)
        except (TypeError, ValueError) as exc:
            raise ConfigError([f"[physical]: {exc}"]) from exc
    else:
        dvals = typed["dimensionless"]
        try:
            params = DimensionlessParams(
                v0=dvals["v0"], kappa=dvals["kappa"], lam=dvals["lambda"],
                kbar=dvals["kbar"],
            )
        except (KeyError, ValueError) as exc:
            raise ConfigError([f"[dimensionless]: {exc}"]) from exc

    init_vals = dict(typed["initial"])
    if "dz" in init_vals:
        init_vals["dz_width"] = init_vals.pop("dz")
    try:
        cfg = ExperimentConfig(
            params=params,
            physical=physical,
            initial=InitialBlock(**init_vals),
            run=RunBlock(**typed["run"]),
            poincare=PoincareBlock(**typed["poincare"]),
            floquet=FloquetBlock(**typed["floquet"]),
            analysis=AnalysisBlock(**typed["analysis"]),
            outdir=typed["output"].get("directory", "out"),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError([str(exc)]) from exc

    _validate(cfg, problems)
    if problems:
        raise ConfigError(problems)
    return cfg


def _validate(cfg: ExperimentConfig, problems: list[str]) -> None:
    ini, run = cfg.initial, cfg.run
    if ini.dz_width is not None and ini.dz_width <= 0:
        problems.append("[initial] dz must be positive")
    if ini.n_particles < 1:
        problems.append("[initial] n_particles must be >= 1")
    if run.t_final <= 0:
        problems.append("[run] t_final must be positive")
    if run.dt <= 0:
        problems.append("[run] dt must be positive")
    if run.record_every <= 0:
        problems.append("[run] record_every must be positive")
    if run.grid_zmax <= run.grid_zmin:
        problems.append("[run] grid_zmax must exceed grid_zmin")
    n = run.grid_points
    if n < 256 or (n & (n - 1)) != 0:
        problems.append("[run] grid_points must be a power of two >= 256")
    if not (0.0 < run.absorber_fraction < 0.5):
        problems.append("[run] absorber_fraction must lie in (0, 0.5)")
    if cfg.poincare.n_orbits < 1:
        problems.append("[poincare] n_orbits must be >= 1")
    if cfg.poincare.n_periods < 1:
        problems.append("[poincare] n_periods must be >= 1")
    nf = cfg.floquet.grid_points
    if nf < 256 or (nf & (nf - 1)) != 0:
        problems.append("[floquet] grid_points must be a power of two >= 256")
    if cfg.floquet.basis_dim < 2:
        problems.append("[floquet] basis_dim must be >= 2")
    if cfg.floquet.basis_dim > nf:
        problems.append("[floquet] basis_dim must not exceed grid_points")
    if cfg.analysis.n_max < 1:
        problems.append("[analysis] n_max must be >= 1")
    if cfg.analysis.fit_p_hi <= cfg.analysis.fit_p_lo:
        problems.append("[analysis] fit_p_hi must exceed fit_p_lo")


def load_config(path: str | Path, overrides: dict[str, str] | None = None) -> ExperimentConfig:
    p = Path(path)
    if not p.is_file():
        raise ConfigError([f"config file not found: {p}"])
    return parse_config(p.read_text(), overrides)
