"""Command-line experiment runner.

Subcommands: convert, poincare, classical, quantum, floquet, analyze,
reproduce {fig1,fig2,fig3}.  Every run echoes its numeric settings into
``manifest.json`` in the output directory; identical configurations and
seeds produce byte-identical CSV outputs.

Exit codes: 0 success, 2 configuration error, 3 runtime/physics error,
4 I/O error.  Errors are printed to stderr as ``error [category]: ...``.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from pathlib import Path

from . import storage
from .analysis import detect_plateaus, fit_decay
from .config import ConfigError, ExperimentConfig, load_config
from .classical import (
    AllOrbitsEscapedError,
    EnsembleEscapeError,
    OrbitEscapedError,
)
from .quantum import AbsorptionLimitError, Grid, GridClipError
from .units import localization_window

TWO_PI = 2.0 * math.pi


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fermiacc",
        description="Bouncing-atom dynamics on a modulated evanescent-wave mirror",
    )
    parser.add_argument("--config", required=True, help="experiment config file (INI)")
    parser.add_argument("--out", default=None, help="output directory (default from config)")
    parser.add_argument("--seed", type=int, default=None, help="override ensemble seed")
    parser.add_argument("--threads", type=int, default=None,
                        help="worker threads (default: FERMIACC_THREADS or all)")
    parser.add_argument("--override", action="append", default=[],
                        metavar="SECTION.KEY=VALUE", help="override a config entry")
    parser.add_argument("--plot", action="store_true",
                        help="also write SVG renderings of the distributions")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("convert", "poincare", "classical", "quantum", "floquet", "analyze"):
        sub.add_parser(name)
    rep = sub.add_parser("reproduce")
    rep.add_argument("figure", choices=("fig1", "fig2", "fig3"))
    return parser


def _set_threads(requested: int | None) -> int:
    import numba

    n = requested
    if n is None:
        env = os.environ.get("FERMIACC_THREADS", "").strip()
        n = int(env) if env else None
    if n is not None:
        numba.set_num_threads(max(1, min(n, numba.config.NUMBA_NUM_THREADS)))
    return numba.get_num_threads()


def _load(args) -> ExperimentConfig:
    overrides = {}
    for item in args.override:
        if "=" not in item:
            raise ConfigError([f"override {item!r}: expected SECTION.KEY=VALUE"])
        key, val = item.split("=", 1)
        overrides[key.strip()] = val.strip()
    if args.seed is not None:
        overrides["initial.seed"] = str(args.seed)
    return load_config(args.config, overrides)


def _outdir(args, cfg: ExperimentConfig, sub: str | None = None) -> Path:
    base = Path(args.out) if args.out else Path(cfg.outdir)
    out = base / sub if sub else base
    out.mkdir(parents=True, exist_ok=True)
    return out


def _manifest(cfg, command, threads, extra=None) -> dict:
    from . import __version__

    settings = cfg.settings_dict()
    settings.update({"command": command, "threads": threads, "version": __version__})
    settings.update(extra or {})
    return settings


def _cmd_convert(args, cfg, threads) -> int:
    d = cfg.params
    win = localization_window(d)
    print(f"V0     = {d.v0:.6g}")
    print(f"kappa  = {d.kappa:.6g}")
    print(f"lambda = {d.lam:.6g}")
    print(f"kbar   = {d.kbar:.6g}")
    print(
        f"localization window: {win.lambda_lower:.6g} < lambda < "
        f"{win.lambda_upper:.6g}" + ("  (empty)" if win.is_empty else "")
    )
    return 0


def _cmd_poincare(args, cfg, threads) -> int:
    from .recipes import poincare_leg

    out = _outdir(args, cfg)
    section = poincare_leg(cfg, cfg.params)
    storage.write_poincare_csv(out / "poincare.csv", section)
    storage.write_manifest(out / "manifest.json", _manifest(cfg, "poincare", threads))
    print(f"poincare: {section.z.size} points from {section.n_orbits} orbits "
          f"({section.n_escaped} escaped) -> {out}")
    return 0


def _cmd_classical(args, cfg, threads) -> int:
    from .recipes import classical_leg

    out = _outdir(args, cfg)
    dz = cfg.initial.resolved_dz(cfg.params.kbar)
    ens, moments, pos, mom = classical_leg(cfg, cfg.params, dz)
    storage.write_moments_csv(out / "moments.csv", moments)
    storage.write_distribution_csv(out / "pos_dist.csv", pos)
    storage.write_distribution_csv(out / "mom_dist.csv", mom)
    storage.write_manifest(out / "manifest.json", _manifest(cfg, "classical", threads))
    print(f"classical: {len(ens)} particles to t={ens.t:g} "
          f"({ens.n_escaped} escaped) -> {out}")
    return 0


def _cmd_quantum(args, cfg, threads) -> int:
    from .recipes import quantum_leg, _write_quantum

    out = _outdir(args, cfg)
    qa = quantum_leg(cfg, cfg.params, cfg.initial.resolved_dz(cfg.params.kbar))
    _write_quantum(out, qa)
    storage.write_manifest(out / "manifest.json", _manifest(cfg, "quantum", threads))
    print(f"quantum: propagated to t={qa.psi.t:g}, norm {qa.psi.norm():.6f} -> {out}")
    return 0


def _cmd_floquet(args, cfg, threads) -> int:
    from .floquet import build_floquet, quasi_spectrum

    out = _outdir(args, cfg)
    fb = cfg.floquet
    grid = Grid(fb.grid_zmin, fb.grid_zmax, fb.grid_points)
    op = build_floquet(cfg.params, grid, fb.basis_dim, dt=fb.dt)
    spec = quasi_spectrum(op)
    storage.write_spectrum_csv(out / "spectrum.csv", spec)
    storage.write_manifest(
        out / "manifest.json",
        _manifest(cfg, "floquet", threads,
                  {"truncation_quality": op.truncation_quality}),
    )
    print(f"floquet: dim {op.dim}, worst column deficit "
          f"{op.truncation_quality:.2e}, mean IPR {spec.ipr.mean():.4f} -> {out}")
    return 0


def _cmd_analyze(args, cfg, threads) -> int:
    from .recipes import measure_windows

    out = _outdir(args, cfg)
    pos_path = out / "pos_dist.csv"
    mom_path = out / "mom_dist.csv"
    if not pos_path.is_file() or not mom_path.is_file():
        raise FileNotFoundError(
            f"analyze expects pos_dist.csv and mom_dist.csv in {out}"
        )
    pos = storage.read_distribution_csv(pos_path, "position")
    mom = storage.read_distribution_csv(mom_path, "momentum")
    windows, _, notes = measure_windows(cfg, cfg.params)
    plateaus = detect_plateaus(pos, windows)
    an = cfg.analysis
    fits = {
        "exp_linear": fit_decay(mom, (an.fit_p_lo, an.fit_p_hi), "exp_linear"),
        "log_quadratic": fit_decay(mom, (an.fit_p_lo, an.fit_p_hi), "log_quadratic"),
    }
    storage.write_plateaus_csv(out / "plateaus.csv", plateaus)
    storage.write_fits_csv(out / "fits.csv", fits)
    from .recipes import _report_lines

    (out / "report.txt").write_text(_report_lines(plateaus, fits, notes))
    print(f"analyze: {len(plateaus.plateaus)} plateaus -> {out}")
    return 0


def _cmd_reproduce(args, cfg, threads) -> int:
    from . import recipes

    out = _outdir(args, cfg, args.figure)
    if args.figure == "fig1":
        art = recipes.reproduce_fig1(cfg, out, plot=args.plot)
        print(f"fig1: {len(art.plateaus.plateaus)} plateaus, "
              f"tail r^2 {art.tail_fits['exp_linear'].r_squared:.3f} -> {out}")
    elif args.figure == "fig2":
        art = recipes.reproduce_fig2(cfg, out, plot=args.plot)
        extra = "" if art.scan is None else (
            f", widths agree: {art.scan.width_agreement_res2}"
        )
        print(f"fig2: {len(art.plateaus.plateaus)} plateaus{extra} -> {out}")
    else:
        art = recipes.reproduce_fig3(cfg, out, plot=args.plot)
        n_cmp = 0 if art.comparison is None else len(art.comparison.entries)
        print(f"fig3: {len(art.ensemble)} particles, {n_cmp} resonances compared -> {out}")
    return 0


_COMMANDS = {
    "convert": _cmd_convert,
    "poincare": _cmd_poincare,
    "classical": _cmd_classical,
    "quantum": _cmd_quantum,
    "floquet": _cmd_floquet,
    "analyze": _cmd_analyze,
    "reproduce": _cmd_reproduce,
}


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = _load(args)
        threads = _set_threads(args.threads)
        return _COMMANDS[args.command](args, cfg, threads)
    except ConfigError as exc:
        print(f"error [config]: {exc}", file=sys.stderr)
        return 2
    except (OrbitEscapedError, AllOrbitsEscapedError, EnsembleEscapeError,
            AbsorptionLimitError, GridClipError, ValueError, RuntimeError) as exc:
        print(f"error [runtime]: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error [io]: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
