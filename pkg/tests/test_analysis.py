import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fermiacc.analysis import (
    PlateauParams,
    ResonanceWindow,
    compare_decay_models,
    compare_profiles,
    detect_plateaus,
    fit_decay,
    histogram_ensemble,
    kbar_scan_report,
    resonance_windows,
)
from fermiacc.classical import Ensemble, resonance_centers
from fermiacc.quantum import DistributionProfile
from fermiacc.units import DimensionlessParams

PAPER = DimensionlessParams(4.0, 0.5, 0.4, 1.0)


def make_profile(axis, prob, space="position"):
    return DistributionProfile(axis=np.asarray(axis, float),
                               prob=np.asarray(prob, float), space=space, t=0.0)


def staircase_profile(edges=(0.0, 25.0, 55.0, 100.0), levels=(1e-1, 1e-5, 1e-12)):
    axis = np.linspace(0.0, 120.0, 1200)
    prob = np.full_like(axis, 1e-20)
    for (lo, hi), lev in zip(zip(edges[:-1], edges[1:]), levels):
        prob[(axis >= lo) & (axis < hi)] = lev
    return make_profile(axis, prob)


class TestHistogram:
    def test_uniform_is_flat_within_multinomial_bounds(self):
        rng = np.random.default_rng(7)
        n, bins = 80000, 40
        ens = Ensemble(z=rng.uniform(0.0, 10.0, n), p=np.zeros(n), t=0.0, rng_seed=7)
        prof = histogram_ensemble(ens, "position", bins, (0.0, 10.0))
        expected = 1.0 / 10.0
        per_bin = n / bins
        sigma = expected * math.sqrt((1 - 1 / bins) / per_bin)
        assert np.abs(prof.prob - expected).max() < 4 * sigma

    def test_gaussian_moments_recovered(self):
        rng = np.random.default_rng(3)
        ens = Ensemble(z=rng.normal(5.0, 2.0, 100000), p=np.zeros(100000),
                       t=0.0, rng_seed=3)
        prof = histogram_ensemble(ens, "position", 100, (-5.0, 15.0))
        w = prof.prob * prof.bin_width
        mean = (w * prof.axis).sum()
        var = (w * (prof.axis - mean) ** 2).sum()
        assert mean == pytest.approx(5.0, abs=0.05)
        assert var == pytest.approx(4.0, rel=0.02)

    def test_normalization_and_edges(self):
        rng = np.random.default_rng(1)
        ens = Ensemble(z=rng.normal(0, 1, 1000), p=np.zeros(1000), t=0.0, rng_seed=1)
        prof = histogram_ensemble(ens, "position", 32)
        assert prof.prob.sum() * prof.bin_width == pytest.approx(1.0, rel=1e-9)
        assert prof.edges is not None and prof.edges.size == 33

    def test_rejections(self):
        ens = Ensemble(z=np.zeros(4), p=np.zeros(4), t=0.0, rng_seed=0,
                       escaped=np.ones(4, dtype=bool))
        with pytest.raises(ValueError, match="surviving"):
            histogram_ensemble(ens, "position", 32)
        ok = Ensemble(z=np.zeros(4), p=np.zeros(4), t=0.0, rng_seed=0)
        with pytest.raises(ValueError, match="bins"):
            histogram_ensemble(ok, "position", 8)


class TestDetectPlateaus:
    WINDOWS = [ResonanceWindow(2, 12.0, 4.0), ResonanceWindow(3, 40.0, 4.0),
               ResonanceWindow(4, 78.0, 4.0)]

    def test_staircase_steps_recovered_exactly(self):
        prof = staircase_profile()
        rep = detect_plateaus(prof, self.WINDOWS,
                              PlateauParams(coarse_width=1.0))
        assert [p.resonance_index for p in rep.plateaus] == [2, 3, 4]
        got = {p.resonance_index: p for p in rep.plateaus}
        # levels exact, edges within one coarse cell or clipped at the
        # midpoint between neighboring windows
        assert got[2].mean_log10_level == pytest.approx(-1.0, abs=1e-9)
        assert got[3].mean_log10_level == pytest.approx(-5.0, abs=1e-9)
        assert got[4].mean_log10_level == pytest.approx(-12.0, abs=1e-9)
        assert got[3].lo == pytest.approx(26.0, abs=1.1)
        assert got[3].hi == pytest.approx(55.0, abs=1.1)

    def test_regions_disjoint_and_ordered(self):
        rep = detect_plateaus(staircase_profile(), self.WINDOWS,
                              PlateauParams(coarse_width=1.0))
        for a, b in zip(rep.plateaus, rep.plateaus[1:]):
            assert a.hi <= b.lo
            assert a.resonance_index < b.resonance_index

    @settings(max_examples=30, deadline=None)
    @given(scale=st.floats(min_value=1e-6, max_value=1e6))
    def test_rescaling_invariance(self, scale):
        prof = staircase_profile()
        scaled = make_profile(prof.axis, prof.prob * scale)
        a = detect_plateaus(prof, self.WINDOWS, PlateauParams(coarse_width=1.0))
        b = detect_plateaus(scaled, self.WINDOWS, PlateauParams(coarse_width=1.0))
        for pa, pb in zip(a.plateaus, b.plateaus):
            assert pb.lo == pytest.approx(pa.lo, abs=1e-9)
            assert pb.hi == pytest.approx(pa.hi, abs=1e-9)
            assert pb.width == pytest.approx(pa.width, abs=1e-9)
            assert pb.mean_log10_level - pa.mean_log10_level == pytest.approx(
                math.log10(scale), abs=1e-9)

    def test_out_of_axis_window_skipped_with_note(self):
        prof = staircase_profile()
        rep = detect_plateaus(prof, [ResonanceWindow(7, 500.0, 4.0)],
                              PlateauParams(coarse_width=1.0))
        assert rep.plateaus == []
        assert any("resonance 7" in n for n in rep.notes)

    def test_narrow_region_rejected_by_min_width(self):
        # a 1.5-unit shelf between two much larger levels is too narrow
        prof = staircase_profile(edges=(0.0, 25.0, 26.5, 100.0))
        rep = detect_plateaus(prof, [ResonanceWindow(3, 26.0, 1.0)],
                              PlateauParams(coarse_width=0.5, min_width=4.0))
        assert rep.plateaus == []
        assert any("min_width" in n for n in rep.notes)

    def test_window_builder(self):
        centers = resonance_centers(PAPER, 4)[1:]
        wins = resonance_windows(centers, {2: 4.0, 3: 5.0, 4: 6.0}, "position")
        assert [w.index for w in wins] == [2, 3, 4]
        assert wins[0].center == pytest.approx(2 * math.pi**2)
        mom = resonance_windows(centers, 1.5, "momentum")
        assert mom[0].center == pytest.approx(2 * math.pi)


class TestFitDecay:
    def test_exp_linear_exact(self):
        axis = np.linspace(1.0, 30.0, 200)
        prof = make_profile(axis, np.exp(-axis / 2.0), "momentum")
        fit = fit_decay(prof, (2.0, 25.0), "exp_linear")
        assert fit.coefficient == pytest.approx(0.5, rel=1e-9)
        assert fit.localization_length == pytest.approx(2.0, rel=1e-9)
        assert fit.r_squared > 1.0 - 1e-12

    def test_exp_sqrt_exact(self):
        axis = np.linspace(0.5, 80.0, 400)
        prof = make_profile(axis, 5.0 * np.exp(-3.0 * np.sqrt(axis)))
        fit = fit_decay(prof, (1.0, 70.0), "exp_sqrt")
        assert fit.coefficient == pytest.approx(3.0, rel=1e-9)

    def test_log_quadratic_exact(self):
        axis = np.linspace(0.0, 10.0, 200)
        prof = make_profile(axis, np.exp(-axis**2 / 8.0), "momentum")
        fit = fit_decay(prof, (0.0, 10.0), "log_quadratic")
        assert fit.coefficient == pytest.approx(1.0 / 8.0, rel=1e-9)

    def test_noise_degrades_gracefully(self):
        rng = np.random.default_rng(42)
        axis = np.linspace(1.0, 30.0, 300)
        clean = np.exp(-axis / 2.0)
        noisy = clean * np.exp(0.05 * rng.standard_normal(axis.size))
        fit = fit_decay(make_profile(axis, noisy, "momentum"), (2.0, 28.0))
        assert fit.coefficient == pytest.approx(0.5, rel=0.1)

    def test_model_comparison_prefers_truth(self):
        axis = np.linspace(1.0, 15.0, 150)
        gauss = make_profile(axis, np.exp(-axis**2 / 30.0), "momentum")
        fits = compare_decay_models(gauss, (1.0, 14.0))
        assert fits["log_quadratic"].r_squared > fits["exp_linear"].r_squared

    def test_rejections(self):
        axis = np.linspace(1.0, 30.0, 100)
        prof = make_profile(axis, np.exp(-axis))
        with pytest.raises(ValueError, match="10 points"):
            fit_decay(prof, (1.0, 1.5))
        bad = make_profile(axis, np.where(axis > 15, 0.0, 1.0))
        with pytest.raises(ValueError, match="non-positive"):
            fit_decay(bad, (2.0, 28.0))
        with pytest.raises(ValueError, match="unknown model"):
            fit_decay(prof, (2.0, 28.0), "cubic")
        fitq = fit_decay(prof, (2.0, 28.0), "log_quadratic")
        with pytest.raises(ValueError):
            _ = fitq.localization_length


class TestCompareProfiles:
    WINDOWS = [ResonanceWindow(2, 12.0, 4.0), ResonanceWindow(3, 40.0, 4.0)]

    def test_identical_profiles_match_perfectly(self):
        prof = staircase_profile()
        rep = compare_profiles(prof, prof, self.WINDOWS,
                               PlateauParams(coarse_width=1.0))
        assert len(rep.entries) == 2
        for e in rep.entries:
            assert e.location_match
            assert e.width_ratio == pytest.approx(1.0)
            assert e.height_ratio == pytest.approx(1.0)

    def test_shifted_copy_fails_location(self):
        prof = staircase_profile()
        shifted = staircase_profile(edges=(0.0, 37.0, 70.0, 110.0))
        rep = compare_profiles(prof, shifted,
                               [ResonanceWindow(3, 40.0, 4.0)],
                               PlateauParams(coarse_width=1.0))
        e = rep.get(3)
        assert e is not None and not e.location_match

    def test_space_mismatch_rejected(self):
        prof = staircase_profile()
        other = make_profile(prof.axis, prof.prob, "momentum")
        with pytest.raises(ValueError, match="spaces"):
            compare_profiles(prof, other, self.WINDOWS)


class TestKbarScan:
    @staticmethod
    def _shelves_then_slope(shelves):
        # flat shelves followed by a steep exponential drop (no flat region
        # left for the remaining windows)
        axis = np.linspace(0.0, 120.0, 1200)
        prob = np.full_like(axis, 1e-30)
        last_edge, last_level = 0.0, 1.0
        for lo, hi, lev in shelves:
            prob[(axis >= lo) & (axis < hi)] = lev
            last_edge, last_level = hi, lev
        tail = axis >= last_edge
        prob[tail] = last_level * np.exp(-3.0 * (axis[tail] - last_edge))
        return make_profile(axis, prob)

    def test_degenerate_synthetic_counts(self):
        small = self._shelves_then_slope([(0.0, 25.0, 1e-1)])
        large = self._shelves_then_slope([(0.0, 25.0, 5e-1), (30.0, 55.0, 1e-4)])
        wins = [ResonanceWindow(2, 12.0, 4.0), ResonanceWindow(3, 40.0, 4.0),
                ResonanceWindow(4, 78.0, 4.0)]
        rep = kbar_scan_report(small, large, wins, kbars=(1.0, 4.0),
                               params=PlateauParams(coarse_width=1.0))
        assert rep.count_small == 1
        assert rep.count_large == 2
        assert rep.count_ordering
        assert rep.width_agreement_res2
        assert rep.height_ordering_res2
