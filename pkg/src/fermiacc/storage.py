"""On-disk formats: CSV writers/readers, wavefunction checkpoints, manifests.

All CSV files carry a single header line; floats are written with
shortest round-trip representation, so identical inputs produce byte
identical files.  The checkpoint layout is documented in docs/formats.md.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .analysis import DecayFit, PlateauReport
from .classical import MomentTrace, PoincareSection
from .floquet import QuasiSpectrum
from .quantum import DistributionProfile, Grid, ObservableTrace, Wavefunction

CHECKPOINT_VERSION = 1
_CHECKPOINT_MAGIC = b"FACC"


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _write_rows(path, header: str, columns) -> None:
    lines = [header]
    for row in zip(*columns):
        lines.append(",".join(_fmt(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def write_distribution_csv(path, profile: DistributionProfile) -> None:
    _write_rows(path, "axis,prob", (profile.axis, profile.prob))


def read_distribution_csv(path, space: str, t: float = 0.0) -> DistributionProfile:
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    return DistributionProfile(axis=data[:, 0], prob=data[:, 1], space=space, t=t)


def write_trace_csv(path, trace: ObservableTrace) -> None:
    _write_rows(
        path,
        "t,norm,mean_z,mean_p,mean_p2,energy",
        (trace.times, trace.norm, trace.mean_z, trace.mean_p, trace.mean_p2,
         trace.energy),
    )


def write_moments_csv(path, trace: MomentTrace) -> None:
    _write_rows(
        path,
        "t,mean_z,mean_p,var_z,var_p",
        (trace.times, trace.mean_z, trace.mean_p, trace.var_z, trace.var_p),
    )


def write_poincare_csv(path, section: PoincareSection) -> None:
    _write_rows(path, "n,z,p", (section.orbit, section.z, section.p))


def write_spectrum_csv(path, spectrum: QuasiSpectrum) -> None:
    _write_rows(
        path,
        "index,eigenphase,ipr",
        (np.arange(spectrum.eigenphases.size), spectrum.eigenphases, spectrum.ipr),
    )


def write_plateaus_csv(path, report: PlateauReport) -> None:
    rows = [
        (p.resonance_index, p.lo, p.hi, p.width, p.mean_log10_level,
         p.window_median_log10)
        for p in report.plateaus
    ]
    lines = ["resonance,lo,hi,width,mean_log10_level,window_median_log10"]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def write_fits_csv(path, fits: dict[str, DecayFit]) -> None:
    lines = ["model,coefficient,intercept,r_squared,range_lo,range_hi"]
    for name in sorted(fits):
        f = fits[name]
        lines.append(
            ",".join([f.model, _fmt(f.coefficient), _fmt(f.intercept),
                      _fmt(f.r_squared), _fmt(f.fit_range[0]), _fmt(f.fit_range[1])])
        )
    Path(path).write_text("\n".join(lines) + "\n")


def save_checkpoint(path, psi: Wavefunction) -> None:
    """Little-endian binary: magic, version byte, grid metadata, amplitudes.

    Layout: b"FACC" | u8 version | f64 kbar | f64 t | f64 z_min | f64 z_max
    | u32 n_points | n_points * (f64 re, f64 im).
    """
    g = psi.grid
    head = _CHECKPOINT_MAGIC + struct.pack(
        "<BddddI", CHECKPOINT_VERSION, psi.kbar, psi.t, g.z_min, g.z_max,
        g.n_points,
    )
    inter = np.empty(2 * g.n_points, dtype="<f8")
    inter[0::2] = psi.amp.real
    inter[1::2] = psi.amp.imag
    Path(path).write_bytes(head + inter.tobytes())


def load_checkpoint(path) -> Wavefunction:
    raw = Path(path).read_bytes()
    if raw[:4] != _CHECKPOINT_MAGIC:
        raise ValueError("not a wavefunction checkpoint (bad magic)")
    version = raw[4]
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    kbar, t, z_min, z_max, n = struct.unpack("<ddddI", raw[5:5 + 36])
    data = np.frombuffer(raw[5 + 36:], dtype="<f8")
    if data.size != 2 * n:
        raise ValueError("checkpoint truncated")
    amp = data[0::2] + 1j * data[1::2]
    return Wavefunction(Grid(z_min, z_max, int(n)), amp, t, kbar)


def write_manifest(path, settings: dict) -> None:
    """Full provenance of a run: every numeric setting, sorted and stable."""
    Path(path).write_text(json.dumps(settings, indent=2, sort_keys=True) + "\n")
