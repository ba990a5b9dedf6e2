"""End-to-end experiment pipelines behind the `reproduce` CLI subcommands.

Each recipe runs the flagship bouncing-atom experiment (modulated mirror,
packet released at the second-resonance turning height) and writes
plot-ready CSV artifacts plus a run manifest into its output directory:

fig1  Poincare section at the configured lam; quantum run at the
      configured kbar; position/momentum distributions, plateau report,
      momentum-tail decay fits.
fig2  The kbar = 4 variant of the quantum run (packet width scaled with
      sqrt(kbar)); plateau report, and a comparison of plateau structure
      against the fig1 profile when it is available.
fig3  Classical ensemble matched to the quantum packet, histograms and
      moment traces, plateau comparison against the fig1 quantum profile.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import storage
from .analysis import (
    ComparisonReport,
    DecayFit,
    KbarScanReport,
    PlateauParams,
    PlateauReport,
    ResonanceWindow,
    compare_profiles,
    detect_plateaus,
    fit_decay,
    histogram_ensemble,
    kbar_scan_report,
    resonance_windows,
)
from .classical import (
    ClassicalState,
    Ensemble,
    MomentTrace,
    PoincareSection,
    evolve_ensemble,
    find_island_center,
    island_halfwidth,
    poincare_section,
    resonance_centers,
    sample_gaussian_ensemble,
)
from .config import ExperimentConfig
from .quantum import (
    Absorber,
    DistributionProfile,
    Grid,
    ObservableTrace,
    Wavefunction,
    init_gaussian,
    momentum_distribution,
    position_distribution,
    propagate,
)
from .units import DimensionlessParams

TWO_PI = 2.0 * math.pi

FIG2_KBAR = 4.0

# classical histogram layout (fig3); documented in docs/formats.md
HIST_Z_RANGE = (-10.0, 230.0)
HIST_Z_BINS = 240
HIST_P_RANGE = (-45.0, 45.0)
HIST_P_BINS = 180


@dataclass
class QuantumArtifacts:
    psi: Wavefunction
    trace: ObservableTrace
    pos: DistributionProfile
    mom: DistributionProfile


@dataclass
class Fig1Artifacts:
    section: PoincareSection
    quantum: QuantumArtifacts
    windows: list[ResonanceWindow]
    half_widths: dict[int, float]
    plateaus: PlateauReport
    tail_fits: dict[str, DecayFit]
    notes: list[str]


@dataclass
class Fig2Artifacts:
    quantum: QuantumArtifacts
    windows: list[ResonanceWindow]
    plateaus: PlateauReport
    scan: KbarScanReport | None


@dataclass
class Fig3Artifacts:
    ensemble: Ensemble
    moments: MomentTrace
    pos_hist: DistributionProfile
    mom_hist: DistributionProfile
    comparison: ComparisonReport | None
    windows: list[ResonanceWindow]


def quantum_leg(cfg: ExperimentConfig, d: DimensionlessParams,
                dz_width: float) -> QuantumArtifacts:
    """Initialize the packet and propagate it per the [run] block."""
    run = cfg.run
    grid = Grid(run.grid_zmin, run.grid_zmax, run.grid_points)
    psi = init_gaussian(cfg.initial.z0, cfg.initial.p0, dz_width, d.kbar, grid)
    absorber = Absorber(run.absorber_fraction) if run.absorber else None
    psi, trace = propagate(psi, run.t_final, run.dt, d, absorber=absorber,
                           record_every=run.record_every)
    return QuantumArtifacts(
        psi=psi, trace=trace,
        pos=position_distribution(psi),
        mom=momentum_distribution(psi),
    )


def measure_windows(
    cfg: ExperimentConfig, d: DimensionlessParams
) -> tuple[list[ResonanceWindow], dict[int, float], list[str]]:
    """Resonance windows for plateau analysis, N = 2..n_max.

    Island half-extents are measured from the stroboscopic map at the
    run's lam; when an island cannot be located the documented default
    half-width is used.  Resonance 1 is excluded: for shallow mirrors its
    orbit merges with the mirror region and carries no separate plateau.
    """
    notes: list[str] = []
    widths: dict[int, float] = {}
    centers = [c for c in resonance_centers(d, cfg.analysis.n_max) if c.index >= 2]
    for c in centers:
        if not cfg.analysis.measure_islands:
            widths[c.index] = cfg.analysis.default_half_width
            continue
        try:
            fp = find_island_center(d, c.index, dt=cfg.run.dt)
            widths[c.index] = island_halfwidth(d, c.index, center=fp, dt=cfg.run.dt)
        except (RuntimeError, ValueError) as exc:
            widths[c.index] = cfg.analysis.default_half_width
            notes.append(
                f"resonance {c.index}: island not measured ({exc}); "
                f"using default half-width {cfg.analysis.default_half_width}"
            )
    if not cfg.analysis.measure_islands:
        notes.append("island widths not measured; default half-width used")
    return resonance_windows(centers, widths, "position"), widths, notes


def poincare_leg(cfg: ExperimentConfig, d: DimensionlessParams) -> PoincareSection:
    """Section from a deterministic ladder of turning-point seeds."""
    pc = cfg.poincare
    seeds = [
        ClassicalState(z, 0.0, 0.0)
        for z in np.linspace(pc.z_seed_min, pc.z_seed_max, pc.n_orbits)
    ]
    return poincare_section(seeds, pc.n_periods, cfg.run.dt, d)


def classical_leg(cfg: ExperimentConfig, d: DimensionlessParams,
                  dz_width: float) -> tuple[Ensemble, MomentTrace,
                                            DistributionProfile, DistributionProfile]:
    dp_width = d.kbar / (2.0 * dz_width)  # matched to the quantum packet
    ens = sample_gaussian_ensemble(
        cfg.initial.z0, cfg.initial.p0, dz_width, dp_width,
        cfg.initial.n_particles, cfg.initial.seed,
    )
    ens, moments = evolve_ensemble(ens, cfg.run.t_final, cfg.run.dt, d,
                                   record_every=cfg.run.record_every)
    pos = histogram_ensemble(ens, "position", HIST_Z_BINS, HIST_Z_RANGE)
    mom = histogram_ensemble(ens, "momentum", HIST_P_BINS, HIST_P_RANGE)
    return ens, moments, pos, mom


def _write_quantum(outdir: Path, art: QuantumArtifacts) -> None:
    storage.write_trace_csv(outdir / "trace.csv", art.trace)
    storage.write_distribution_csv(outdir / "pos_dist.csv", art.pos)
    storage.write_distribution_csv(outdir / "mom_dist.csv", art.mom)
    storage.save_checkpoint(outdir / "psi_final.wf", art.psi)


def _manifest(cfg: ExperimentConfig, recipe: str, extra: dict | None = None) -> dict:
    from . import __version__

    settings = cfg.settings_dict()
    settings["recipe"] = recipe
    settings["version"] = __version__
    settings.update(extra or {})
    return settings


def _report_lines(plateaus: PlateauReport, fits: dict[str, DecayFit] | None,
                  notes: list[str]) -> str:
    lines = ["plateau report (position space)"]
    for p in plateaus.plateaus:
        lines.append(
            f"  resonance {p.resonance_index}: level {p.mean_log10_level:+.2f} "
            f"(log10), window median {p.window_median_log10:+.2f}, "
            f"extent [{p.lo:.1f}, {p.hi:.1f}] width {p.width:.1f}"
        )
    for n in plateaus.notes:
        lines.append(f"  note: {n}")
    if fits:
        lines.append("momentum decay fits")
        for name in sorted(fits):
            f = fits[name]
            lines.append(
                f"  {name} over [{f.fit_range[0]:.1f}, {f.fit_range[1]:.1f}]: "
                f"coefficient {f.coefficient:.4f}, r^2 {f.r_squared:.4f}"
            )
    for n in notes:
        lines.append(f"note: {n}")
    return "\n".join(lines) + "\n"


def reproduce_fig1(cfg: ExperimentConfig, outdir: str | Path | None = None,
                   plot: bool = False) -> Fig1Artifacts:
    """Poincare section plus the quantum run, with plateau/decay analysis."""
    d = cfg.params
    section = poincare_leg(cfg, d)
    qa = quantum_leg(cfg, d, cfg.initial.resolved_dz(d.kbar))
    windows, half_widths, notes = measure_windows(cfg, d)
    plateaus = detect_plateaus(qa.pos, windows)
    an = cfg.analysis
    tail_fits = {
        "exp_linear": fit_decay(qa.mom, (an.fit_p_lo, an.fit_p_hi), "exp_linear"),
        "log_quadratic": fit_decay(qa.mom, (an.fit_p_lo, an.fit_p_hi), "log_quadratic"),
    }
    art = Fig1Artifacts(section, qa, windows, half_widths, plateaus, tail_fits, notes)
    if outdir is not None:
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        storage.write_poincare_csv(outdir / "poincare.csv", section)
        _write_quantum(outdir, qa)
        storage.write_plateaus_csv(outdir / "plateaus.csv", plateaus)
        storage.write_fits_csv(outdir / "fits.csv", tail_fits)
        (outdir / "report.txt").write_text(_report_lines(plateaus, tail_fits, notes))
        storage.write_manifest(outdir / "manifest.json", _manifest(cfg, "fig1"))
        if plot:
            _plot_fig1(outdir, art)
    return art


def reproduce_fig2(cfg: ExperimentConfig, outdir: str | Path | None = None,
                   fig1_pos: DistributionProfile | None = None,
                   plot: bool = False) -> Fig2Artifacts:
    """The kbar = 4 variant; plateau structure and cross-kbar comparison.

    The packet width follows the minimum-uncertainty scaling
    dz = sqrt(kbar)/2, so both position and momentum widths grow with
    kbar.  When the fig1 position profile is available (passed in, or
    found as ../fig1/pos_dist.csv next to ``outdir``), the report also
    compares plateau structure across kbar.
    """
    d = replace(cfg.params, kbar=FIG2_KBAR)
    qa = quantum_leg(cfg, d, math.sqrt(FIG2_KBAR) / 2.0)
    windows, _, notes = measure_windows(cfg, d)
    plateaus = detect_plateaus(qa.pos, windows)
    if fig1_pos is None and outdir is not None:
        cand = Path(outdir).parent / "fig1" / "pos_dist.csv"
        if cand.is_file():
            fig1_pos = storage.read_distribution_csv(cand, "position")
    scan = None
    if fig1_pos is not None:
        scan = kbar_scan_report(fig1_pos, qa.pos, windows,
                                kbars=(cfg.params.kbar, FIG2_KBAR))
    art = Fig2Artifacts(qa, windows, plateaus, scan)
    if outdir is not None:
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        _write_quantum(outdir, qa)
        storage.write_plateaus_csv(outdir / "plateaus.csv", plateaus)
        lines = _report_lines(plateaus, None, notes)
        if scan is not None:
            lines += (
                f"kbar scan {scan.kbar_small:g} -> {scan.kbar_large:g}: "
                f"counts {scan.count_small} -> {scan.count_large}, "
                f"res-2 width agreement {scan.width_agreement_res2}, "
                f"res-2 height ordering {scan.height_ordering_res2}\n"
            )
        (outdir / "report.txt").write_text(lines)
        storage.write_manifest(outdir / "manifest.json",
                               _manifest(cfg, "fig2", {"params.kbar": FIG2_KBAR}))
        if plot:
            _plot_profiles(outdir, [("kbar4", qa.pos)], "pos_dist.svg")
    return art


def reproduce_fig3(cfg: ExperimentConfig, outdir: str | Path | None = None,
                   quantum_pos: DistributionProfile | None = None,
                   plot: bool = False) -> Fig3Artifacts:
    """Classical ensemble matched to the quantum packet, with comparison."""
    d = cfg.params
    dz_width = cfg.initial.resolved_dz(d.kbar)
    ens, moments, pos_hist, mom_hist = classical_leg(cfg, d, dz_width)
    windows, _, notes = measure_windows(cfg, d)
    if quantum_pos is None and outdir is not None:
        cand = Path(outdir).parent / "fig1" / "pos_dist.csv"
        if cand.is_file():
            quantum_pos = storage.read_distribution_csv(cand, "position")
    comparison = None
    if quantum_pos is not None:
        comparison = compare_profiles(pos_hist, quantum_pos, windows)
    art = Fig3Artifacts(ens, moments, pos_hist, mom_hist, comparison, windows)
    if outdir is not None:
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        storage.write_moments_csv(outdir / "moments.csv", moments)
        storage.write_distribution_csv(outdir / "pos_dist.csv", pos_hist)
        storage.write_distribution_csv(outdir / "mom_dist.csv", mom_hist)
        lines = [f"classical ensemble: {len(ens)} particles, "
                 f"{ens.n_escaped} escaped, t = {ens.t:g}"]
        if comparison is not None:
            for e in comparison.entries:
                lines.append(
                    f"  resonance {e.resonance_index}: location match "
                    f"{e.location_match}, width ratio {e.width_ratio:.2f}, "
                    f"height ratio (classical/quantum) {e.height_ratio:.2f}"
                )
            for n in comparison.notes:
                lines.append(f"  note: {n}")
        for n in notes:
            lines.append(f"note: {n}")
        (outdir / "report.txt").write_text("\n".join(lines) + "\n")
        storage.write_manifest(outdir / "manifest.json", _manifest(cfg, "fig3"))
        if plot:
            _plot_profiles(outdir, [("classical", pos_hist)] +
                           ([("quantum", quantum_pos)] if quantum_pos is not None else []),
                           "pos_dist.svg")
    return art


def _plot_profiles(outdir: Path, labeled, filename: str) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4))
    for label, prof in labeled:
        m = prof.prob > 0
        ax.semilogy(prof.axis[m], prof.prob[m], lw=0.8, label=label)
    ax.set_xlabel("z" if labeled[0][1].space == "position" else "p")
    ax.set_ylabel("probability density")
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(outdir / filename)
    plt.close(fig)


def _plot_fig1(outdir: Path, art: Fig1Artifacts) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(art.section.z, art.section.p, ",", ms=1)
    ax.set_xlabel("z")
    ax.set_ylabel("p")
    fig.tight_layout()
    fig.savefig(outdir / "poincare.svg")
    plt.close(fig)
    _plot_profiles(outdir, [("quantum", art.quantum.pos)], "pos_dist.svg")
    _plot_profiles(outdir, [("quantum", art.quantum.mom)], "mom_dist.svg")
