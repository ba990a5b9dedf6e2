import math

import numpy as np
import pytest

from fermiacc import storage
from fermiacc.analysis import fit_decay
from fermiacc.classical import MomentTrace, PoincareSection
from fermiacc.config import ConfigError, parse_config
from fermiacc.quantum import DistributionProfile, Grid, init_gaussian

MINIMAL = """
[dimensionless]
v0 = 4.0
kappa = 0.5
lambda = 0.4
kbar = 1.0
"""

PHYSICAL = """
[physical]
mass = 2.21e-25
rabi_eff = 37070.0
decay_wavenumber = 2197802.0
mod_frequency = 9280.5
mod_amplitude_eps = 0.2
"""


class TestConfig:
    def test_minimal_dimensionless(self):
        cfg = parse_config(MINIMAL)
        assert cfg.params.v0 == 4.0
        assert cfg.params.lam == 0.4
        assert cfg.run.grid_points == 2**14
        assert cfg.initial.n_particles == 60000

    def test_physical_section_converted(self):
        cfg = parse_config(PHYSICAL)
        assert cfg.physical is not None
        assert cfg.params.kbar == pytest.approx(4.0, rel=0.02)
        assert cfg.params.kappa == pytest.approx(0.5, rel=0.02)

    def test_both_sections_rejected(self):
        with pytest.raises(ConfigError, match="exactly one"):
            parse_config(MINIMAL + PHYSICAL)

    def test_neither_section_rejected(self):
        with pytest.raises(ConfigError, match="exactly one"):
            parse_config("[run]\nt_final = 10.0\n")

    def test_missing_key_named(self):
        with pytest.raises(ConfigError, match="'kbar'"):
            parse_config("[dimensionless]\nv0 = 4.0\nkappa = 0.5\nlambda = 0.4\n")

    def test_all_problems_listed(self):
        text = MINIMAL + "\n[run]\nt_final = -5\ndt = 0\ngrid_points = 1000\n"
        with pytest.raises(ConfigError) as err:
            parse_config(text)
        msg = str(err.value)
        assert "t_final" in msg and "dt" in msg and "grid_points" in msg

    def test_unknown_keys_rejected(self):
        with pytest.raises(ConfigError, match="unknown key"):
            parse_config(MINIMAL + "\n[run]\nt_fnal = 10\n")
        with pytest.raises(ConfigError, match="unknown section"):
            parse_config(MINIMAL + "\n[runs]\nt_final = 10\n")

    def test_overrides_applied_and_validated(self):
        cfg = parse_config(MINIMAL, {"run.t_final": "50.0", "initial.seed": "7"})
        assert cfg.run.t_final == 50.0
        assert cfg.initial.seed == 7
        with pytest.raises(ConfigError, match="unknown setting"):
            parse_config(MINIMAL, {"run.bogus": "1"})

    def test_resolved_packet_width_default(self):
        cfg = parse_config(MINIMAL.replace("kbar = 1.0", "kbar = 4.0"))
        assert cfg.initial.resolved_dz(cfg.params.kbar) == pytest.approx(1.0)
        cfg2 = parse_config(MINIMAL + "\n[initial]\ndz = 0.25\n")
        assert cfg2.initial.resolved_dz(1.0) == 0.25

    def test_settings_dict_flat_numeric(self):
        settings = parse_config(MINIMAL).settings_dict()
        assert settings["params.lambda"] == 0.4
        assert settings["run.t_final"] == 1000.0
        assert settings["initial.seed"] == 20260810


class TestStorage:
    def test_distribution_round_trip(self, tmp_path):
        axis = np.linspace(-3.0, 3.0, 64)
        prof = DistributionProfile(axis=axis, prob=np.exp(-axis**2), space="momentum",
                                   t=2.0)
        path = tmp_path / "dist.csv"
        storage.write_distribution_csv(path, prof)
        back = storage.read_distribution_csv(path, "momentum", t=2.0)
        assert np.array_equal(back.axis, prof.axis)
        assert np.array_equal(back.prob, prof.prob)
        assert path.read_text().splitlines()[0] == "axis,prob"

    def test_fit_on_round_tripped_profile(self, tmp_path):
        axis = np.linspace(1.0, 30.0, 200)
        prof = DistributionProfile(axis=axis, prob=np.exp(-axis / 3.0),
                                   space="momentum", t=0.0)
        storage.write_distribution_csv(tmp_path / "d.csv", prof)
        back = storage.read_distribution_csv(tmp_path / "d.csv", "momentum")
        fit = fit_decay(back, (2.0, 28.0))
        assert fit.localization_length == pytest.approx(3.0, rel=1e-9)

    def test_moments_and_poincare_headers(self, tmp_path):
        tr = MomentTrace(times=np.array([0.0, 1.0]), mean_z=np.array([1.0, 2.0]),
                         mean_p=np.array([0.0, 0.1]), var_z=np.array([1.0, 1.1]),
                         var_p=np.array([0.5, 0.6]))
        storage.write_moments_csv(tmp_path / "m.csv", tr)
        assert (tmp_path / "m.csv").read_text().splitlines()[0] == \
            "t,mean_z,mean_p,var_z,var_p"
        sec = PoincareSection(orbit=np.array([0, 0, 1]), z=np.array([1.0, 2.0, 3.0]),
                              p=np.array([0.1, 0.2, 0.3]), n_orbits=2, n_periods=2,
                              lam=0.4)
        storage.write_poincare_csv(tmp_path / "p.csv", sec)
        lines = (tmp_path / "p.csv").read_text().splitlines()
        assert lines[0] == "n,z,p"
        assert lines[1].startswith("0,")

    def test_write_deterministic_bytes(self, tmp_path):
        axis = np.linspace(0.0, 1.0, 32)
        prof = DistributionProfile(axis=axis, prob=np.sqrt(axis + 0.1),
                                   space="position", t=0.0)
        storage.write_distribution_csv(tmp_path / "a.csv", prof)
        storage.write_distribution_csv(tmp_path / "b.csv", prof)
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()

    def test_checkpoint_round_trip(self, tmp_path):
        grid = Grid(-20.0, 108.0, 512)
        psi = init_gaussian(20.0, 1.0, 0.5, 1.0, grid)
        psi.t = 3.5
        path = tmp_path / "psi.wf"
        storage.save_checkpoint(path, psi)
        back = storage.load_checkpoint(path)
        assert back.grid == grid
        assert back.t == 3.5
        assert back.kbar == 1.0
        assert np.array_equal(back.amp, psi.amp)

    def test_checkpoint_version_and_magic_checked(self, tmp_path):
        grid = Grid(-20.0, 108.0, 512)
        psi = init_gaussian(20.0, 0.0, 0.5, 1.0, grid)
        path = tmp_path / "psi.wf"
        storage.save_checkpoint(path, psi)
        raw = bytearray(path.read_bytes())
        raw[4] = 99
        path.write_bytes(bytes(raw))
        with pytest.raises(ValueError, match="version"):
            storage.load_checkpoint(path)
        path.write_bytes(b"XXXX" + bytes(raw[4:]))
        with pytest.raises(ValueError, match="magic"):
            storage.load_checkpoint(path)

    def test_manifest_stable(self, tmp_path):
        storage.write_manifest(tmp_path / "m.json", {"b": 2, "a": 1.5})
        text = (tmp_path / "m.json").read_text()
        assert text.index('"a"') < text.index('"b"')
