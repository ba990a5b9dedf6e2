"""Distribution diagnostics: plateaus, decay-law fits, profile comparisons.

Plateaus are flat shelves of the log-scale probability distribution over
the stable resonance islands, separated by drops of several decades into
the chaotic sea.  Quantum profiles carry interference fringes on top of
the shelves, so detection operates on a coarse-grained profile and a
median seed level; all thresholds are explicit parameters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, NamedTuple, Sequence

import numpy as np

from .classical import Ensemble, ResonanceCenter
from .quantum import DistributionProfile

LOG_FLOOR = 1e-300


class ResonanceWindow(NamedTuple):
    """Nominal axis interval of one resonance: center +/- half_width."""

    index: int
    center: float
    half_width: float


def resonance_windows(
    centers: Sequence[ResonanceCenter],
    half_widths: Mapping[int, float] | float,
    space: str = "position",
) -> list[ResonanceWindow]:
    """Build analysis windows from resonance labels and island half-extents.

    Position windows sit at the turning heights z_N; momentum windows at
    the bounce momenta p_N.  ``half_widths`` comes from the measured
    classical island extent (per resonance index, or one common value).
    """
    out = []
    for c in centers:
        hw = half_widths[c.index] if isinstance(half_widths, Mapping) else float(half_widths)
        center = c.z if space == "position" else c.p
        out.append(ResonanceWindow(c.index, center, hw))
    return sorted(out, key=lambda w: w.center)


@dataclass(frozen=True)
class PlateauParams:
    """Detection thresholds (documented, configurable).

    flatness_decades: maximal |log10(density) - level| inside a plateau.
    coarse_width: linear averaging window applied before taking logs,
        suppressing quantum interference fringes.
    min_width: narrower flat regions do not count as detected plateaus.
    """

    flatness_decades: float = 0.5
    coarse_width: float = 3.0
    min_width: float = 2.0


@dataclass
class Plateau:
    resonance_index: int
    lo: float
    hi: float
    width: float
    mean_log10_level: float      # mean log10 density over the flat region
    window_median_log10: float   # median log10 density over the nominal window

    @property
    def center(self) -> float:
        return 0.5 * (self.lo + self.hi)


@dataclass
class PlateauReport:
    plateaus: list[Plateau]
    space: str
    params: PlateauParams
    notes: list[str] = field(default_factory=list)

    def get(self, index: int) -> Plateau | None:
        for p in self.plateaus:
            if p.resonance_index == index:
                return p
        return None


def _coarse_grain(axis, prob, width):
    bin_w = axis[1] - axis[0]
    m = max(1, int(round(width / bin_w)))
    nb = axis.size // m
    if nb < 4:
        raise ValueError("coarse_width too large for this profile")
    ax = axis[: nb * m].reshape(nb, m).mean(axis=1)
    pr = prob[: nb * m].reshape(nb, m).mean(axis=1)
    return ax, pr


def _interp_edge(ax, lg, i_in, i_out, bound):
    """Axis point between bins i_in (compliant) and i_out where the
    log-density crosses the bound; linear interpolation."""
    x0, x1 = ax[i_in], ax[i_out]
    y0, y1 = lg[i_in], lg[i_out]
    if y1 == y0:
        return x1
    f = (bound - y0) / (y1 - y0)
    f = min(max(f, 0.0), 1.0)
    return x0 + f * (x1 - x0)


def detect_plateaus(
    profile: DistributionProfile,
    resonances: Sequence[ResonanceWindow],
    params: PlateauParams = PlateauParams(),
) -> PlateauReport:
    """Find the flat shelf of the profile at each resonance window.

    For every window the seed level is the median log10 density over
    [center - hw, center + hw]; the plateau is the maximal surrounding
    region where the coarse-grained log density stays within
    ``flatness_decades`` of that level.  Regions are clipped at the
    midpoints between neighboring resonance centers, which keeps them
    disjoint and ordered.  Resonances outside the profile axis, or whose
    flat region is narrower than ``min_width``, are skipped with a note.
    """
    windows = sorted(resonances, key=lambda w: w.center)
    ax, pr = _coarse_grain(profile.axis, profile.prob, params.coarse_width)
    lg = np.log10(np.maximum(pr, LOG_FLOOR))
    centers = [w.center for w in windows]
    plateaus: list[Plateau] = []
    notes: list[str] = []
    for i, w in enumerate(windows):
        cell_lo = -np.inf if i == 0 else 0.5 * (centers[i - 1] + centers[i])
        cell_hi = np.inf if i == len(windows) - 1 else 0.5 * (centers[i] + centers[i + 1])
        in_win = (ax >= w.center - w.half_width) & (ax <= w.center + w.half_width)
        if not in_win.any():
            notes.append(f"resonance {w.index}: window outside profile axis; skipped")
            continue
        level = float(np.median(lg[in_win]))
        ok = np.abs(lg - level) <= params.flatness_decades
        cand = np.where(in_win & ok)[0]
        if cand.size == 0:
            notes.append(f"resonance {w.index}: no bins within flatness of the level")
            continue
        i0 = int(cand[np.argmin(np.abs(ax[cand] - w.center))])
        lo_i = i0
        while lo_i > 0 and ok[lo_i - 1] and ax[lo_i - 1] >= cell_lo:
            lo_i -= 1
        hi_i = i0
        while hi_i < ax.size - 1 and ok[hi_i + 1] and ax[hi_i + 1] <= cell_hi:
            hi_i += 1
        # sub-bin edges where the log density crosses level +/- flatness
        if lo_i > 0 and ax[lo_i - 1] >= cell_lo:
            bound = level + math.copysign(params.flatness_decades, lg[lo_i - 1] - level)
            lo = _interp_edge(ax, lg, lo_i, lo_i - 1, bound)
        else:
            lo = max(float(ax[max(lo_i - 1, 0)]), cell_lo) if lo_i > 0 else float(ax[0])
        if hi_i < ax.size - 1 and ax[hi_i + 1] <= cell_hi:
            bound = level + math.copysign(params.flatness_decades, lg[hi_i + 1] - level)
            hi = _interp_edge(ax, lg, hi_i, hi_i + 1, bound)
        else:
            hi = min(float(ax[min(hi_i + 1, ax.size - 1)]), cell_hi) if hi_i < ax.size - 1 else float(ax[-1])
        width = hi - lo
        if width < params.min_width:
            notes.append(
                f"resonance {w.index}: flat region width {width:.2f} below "
                f"min_width {params.min_width}"
            )
            continue
        plateaus.append(
            Plateau(
                resonance_index=w.index,
                lo=lo,
                hi=hi,
                width=width,
                mean_log10_level=float(lg[lo_i : hi_i + 1].mean()),
                window_median_log10=level,
            )
        )
    return PlateauReport(plateaus=plateaus, space=profile.space, params=params, notes=notes)


# ---------------------------------------------------------------------------
# decay-law fits

FIT_MODELS = ("exp_linear", "exp_sqrt", "log_quadratic")


@dataclass
class DecayFit:
    """Least-squares fit of log density against a model coordinate.

    exp_linear:    ln rho = intercept - coefficient * x
    exp_sqrt:      ln rho = intercept - coefficient * sqrt(x)
    log_quadratic: ln rho = intercept - coefficient * x^2   (Gaussian shape)
    """

    model: str
    coefficient: float
    intercept: float
    r_squared: float
    fit_range: tuple[float, float]

    @property
    def localization_length(self) -> float:
        if self.model != "exp_linear":
            raise ValueError("localization length is defined for exp_linear fits")
        return 1.0 / self.coefficient


def fit_decay(
    profile: DistributionProfile,
    fit_range: tuple[float, float],
    model: str = "exp_linear",
) -> DecayFit:
    """Fit the stated decay law to the profile over ``fit_range``.

    Requires at least 10 bins in range, all with positive density.
    """
    if model not in FIT_MODELS:
        raise ValueError(f"fit_decay: unknown model {model!r}")
    lo, hi = fit_range
    m = (profile.axis >= lo) & (profile.axis <= hi)
    if m.sum() < 10:
        raise ValueError(f"fit_decay: need >= 10 points in range, got {int(m.sum())}")
    x = profile.axis[m]
    dens = profile.prob[m]
    if (dens <= 0.0).any():
        raise ValueError("fit_decay: non-positive densities in the fit range")
    if model == "exp_sqrt":
        if (x < 0.0).any():
            raise ValueError("fit_decay: exp_sqrt requires a non-negative axis range")
        coord = np.sqrt(x)
    elif model == "log_quadratic":
        coord = x**2
    else:
        coord = x
    y = np.log(dens)
    design = np.column_stack([coord, np.ones_like(coord)])
    (slope, intercept), *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - design @ np.array([slope, intercept])
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - float((resid**2).sum()) / ss_tot if ss_tot > 0 else 0.0
    return DecayFit(
        model=model,
        coefficient=float(-slope),
        intercept=float(intercept),
        r_squared=max(0.0, min(1.0, r2)),
        fit_range=(float(lo), float(hi)),
    )


def compare_decay_models(
    profile: DistributionProfile,
    fit_range: tuple[float, float],
    models: Sequence[str] = ("exp_linear", "log_quadratic"),
) -> dict[str, DecayFit]:
    """Fit several models over one range; key 'best' is not included --
    rank by r_squared on the caller's side."""
    return {m: fit_decay(profile, fit_range, m) for m in models}


# ---------------------------------------------------------------------------
# histograms and profile comparisons

def histogram_ensemble(
    e: Ensemble,
    space: str = "position",
    bins: int = 128,
    hist_range: tuple[float, float] | None = None,
) -> DistributionProfile:
    """Normalized density histogram of the non-escaped particles."""
    if bins < 16:
        raise ValueError("histogram_ensemble: bins must be >= 16")
    if space not in ("position", "momentum"):
        raise ValueError("histogram_ensemble: space must be position|momentum")
    values = (e.z if space == "position" else e.p)[~e.escaped]
    if values.size == 0:
        raise ValueError("histogram_ensemble: ensemble has no surviving particles")
    dens, edges = np.histogram(values, bins=bins, range=hist_range, density=True)
    centers = 0.5 * (edges[1:] + edges[:-1])
    return DistributionProfile(axis=centers, prob=dens, space=space, t=e.t, edges=edges)


@dataclass
class ResonanceComparison:
    resonance_index: int
    location_match: bool
    width_ratio: float           # first / second profile
    height_ratio: float          # first / second, from window medians


@dataclass
class ComparisonReport:
    entries: list[ResonanceComparison]
    notes: list[str] = field(default_factory=list)

    def get(self, index: int) -> ResonanceComparison | None:
        for e in self.entries:
            if e.resonance_index == index:
                return e
        return None


def compare_profiles(
    first: DistributionProfile,
    second: DistributionProfile,
    resonances: Sequence[ResonanceWindow],
    params: PlateauParams = PlateauParams(),
    location_tol: float = 0.2,
) -> ComparisonReport:
    """Per-resonance plateau agreement between two same-space profiles.

    Locations match when the plateau centers differ by less than
    ``location_tol`` times the wider plateau.  Height ratios compare the
    median log densities over the common nominal window, which is robust
    against interference fringes.
    """
    if first.space != second.space:
        raise ValueError("compare_profiles: profiles live in different spaces")
    rep1 = detect_plateaus(first, resonances, params)
    rep2 = detect_plateaus(second, resonances, params)
    entries: list[ResonanceComparison] = []
    notes = [f"first: {n}" for n in rep1.notes] + [f"second: {n}" for n in rep2.notes]
    for w in sorted(resonances, key=lambda w: w.index):
        p1 = rep1.get(w.index)
        p2 = rep2.get(w.index)
        if p1 is None or p2 is None:
            notes.append(f"resonance {w.index}: plateau missing in one profile")
            continue
        wide = max(p1.width, p2.width)
        entries.append(
            ResonanceComparison(
                resonance_index=w.index,
                location_match=abs(p1.center - p2.center) <= location_tol * wide,
                width_ratio=p1.width / p2.width,
                height_ratio=10.0 ** (p1.window_median_log10 - p2.window_median_log10),
            )
        )
    return ComparisonReport(entries=entries, notes=notes)


@dataclass
class KbarScanEntry:
    resonance_index: int
    width_small: float | None
    width_large: float | None
    level_small: float | None
    level_large: float | None


@dataclass
class KbarScanReport:
    """Plateau structure comparison between a small and a large kbar run."""

    kbar_small: float
    kbar_large: float
    count_small: int
    count_large: int
    entries: list[KbarScanEntry]
    width_agreement_res2: bool
    height_ordering_res2: bool
    count_ordering: bool


def kbar_scan_report(
    profile_small: DistributionProfile,
    profile_large: DistributionProfile,
    resonances: Sequence[ResonanceWindow],
    kbars: tuple[float, float],
    params: PlateauParams = PlateauParams(),
    width_tol: float = 0.25,
) -> KbarScanReport:
    """Compare plateau count, widths and heights across effective hbar.

    Checks that the resonance-2 plateau width agrees within ``width_tol``
    (island geometry is classical, so it should not depend on kbar), that
    its height is larger for the larger kbar, and that at least as many
    plateaus are detected for the larger kbar.
    """
    rep_s = detect_plateaus(profile_small, resonances, params)
    rep_l = detect_plateaus(profile_large, resonances, params)
    entries = []
    for w in sorted(resonances, key=lambda w: w.index):
        ps = rep_s.get(w.index)
        pl = rep_l.get(w.index)
        entries.append(
            KbarScanEntry(
                resonance_index=w.index,
                width_small=None if ps is None else ps.width,
                width_large=None if pl is None else pl.width,
                level_small=None if ps is None else ps.window_median_log10,
                level_large=None if pl is None else pl.window_median_log10,
            )
        )
    e2 = next((e for e in entries if e.resonance_index == 2), None)
    width_ok = (
        e2 is not None
        and e2.width_small is not None
        and e2.width_large is not None
        and abs(e2.width_small - e2.width_large) <= width_tol * max(e2.width_small, e2.width_large)
    )
    height_ok = (
        e2 is not None
        and e2.level_small is not None
        and e2.level_large is not None
        and e2.level_large > e2.level_small
    )
    return KbarScanReport(
        kbar_small=kbars[0],
        kbar_large=kbars[1],
        count_small=len(rep_s.plateaus),
        count_large=len(rep_l.plateaus),
        entries=entries,
        width_agreement_res2=width_ok,
        height_ordering_res2=height_ok,
        count_ordering=len(rep_l.plateaus) >= len(rep_s.plateaus),
    )
