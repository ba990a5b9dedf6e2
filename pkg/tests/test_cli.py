import json

import pytest

from fermiacc.cli import main

CESIUM_KBAR4 = """
[physical]
mass = 2.21e-25
rabi_eff = 37070.793
decay_wavenumber = 2197802.19780
mod_frequency = 9280.530
mod_amplitude_eps = 0.2
"""

# heavily reduced settings: exercises the full pipeline, not the physics
SMOKE = """
[dimensionless]
v0 = 4.0
kappa = 0.5
lambda = 0.4
kbar = 1.0

[initial]
z0 = 20.0
dz = 0.5
n_particles = 400
seed = 11

[run]
t_final = 40.0
record_every = 6.2831853
grid_zmin = -20.0
grid_zmax = 108.0
grid_points = 512

[poincare]
n_orbits = 6
n_periods = 10

[floquet]
basis_dim = 64
dt = 0.0251327412
grid_zmin = -16.0
grid_zmax = 80.0
grid_points = 512

[analysis]
n_max = 2
fit_p_lo = 3.0
fit_p_hi = 8.0
measure_islands = false
"""


@pytest.fixture
def smoke_config(tmp_path):
    path = tmp_path / "smoke.ini"
    path.write_text(SMOKE)
    return path


class TestConvert:
    def test_cesium_values_printed(self, tmp_path, capsys):
        path = tmp_path / "cs.ini"
        path.write_text(CESIUM_KBAR4)
        assert main(["--config", str(path), "convert"]) == 0
        out = capsys.readouterr().out
        assert "kbar   = 3.96" in out
        assert "kappa  = 0.50" in out
        assert "V0     = 3.95" in out
        assert "localization window" in out

    def test_missing_key_names_it(self, tmp_path, capsys):
        path = tmp_path / "bad.ini"
        path.write_text("[dimensionless]\nv0 = 4.0\nkappa = 0.5\nlambda = 0.4\n")
        assert main(["--config", str(path), "convert"]) == 2
        err = capsys.readouterr().err
        assert "error [config]" in err
        assert "kbar" in err

    def test_missing_file(self, capsys):
        assert main(["--config", "/nonexistent.ini", "convert"]) == 2
        assert "not found" in capsys.readouterr().err


class TestRunners:
    def test_poincare_and_outputs(self, smoke_config, tmp_path, capsys):
        out = tmp_path / "out"
        assert main(["--config", str(smoke_config), "--out", str(out),
                     "poincare"]) == 0
        assert (out / "poincare.csv").is_file()
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["command"] == "poincare"
        assert manifest["params.lambda"] == 0.4

    def test_classical_runner(self, smoke_config, tmp_path):
        out = tmp_path / "out"
        assert main(["--config", str(smoke_config), "--out", str(out),
                     "classical"]) == 0
        for name in ("moments.csv", "pos_dist.csv", "mom_dist.csv", "manifest.json"):
            assert (out / name).is_file()

    def test_quantum_runner_and_checkpoint(self, smoke_config, tmp_path):
        from fermiacc.storage import load_checkpoint

        out = tmp_path / "out"
        assert main(["--config", str(smoke_config), "--out", str(out),
                     "quantum"]) == 0
        psi = load_checkpoint(out / "psi_final.wf")
        assert psi.norm() == pytest.approx(1.0, abs=1e-8)
        assert psi.t == pytest.approx(40.0)

    def test_floquet_runner(self, smoke_config, tmp_path):
        out = tmp_path / "out"
        assert main(["--config", str(smoke_config), "--out", str(out),
                     "floquet"]) == 0
        lines = (out / "spectrum.csv").read_text().splitlines()
        assert lines[0] == "index,eigenphase,ipr"
        assert len(lines) == 65

    def test_analyze_requires_artifacts(self, smoke_config, tmp_path, capsys):
        out = tmp_path / "empty"
        out.mkdir()
        assert main(["--config", str(smoke_config), "--out", str(out),
                     "analyze"]) == 4
        assert "pos_dist.csv" in capsys.readouterr().err

    def test_quantum_then_analyze(self, smoke_config, tmp_path):
        out = tmp_path / "out"
        main(["--config", str(smoke_config), "--out", str(out), "quantum"])
        assert main(["--config", str(smoke_config), "--out", str(out),
                     "analyze"]) == 0
        assert (out / "report.txt").is_file()
        assert (out / "fits.csv").is_file()

    def test_override_flag(self, smoke_config, tmp_path):
        out = tmp_path / "out"
        assert main(["--config", str(smoke_config), "--out", str(out),
                     "--override", "run.t_final=15.0", "quantum"]) == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["run.t_final"] == 15.0

    def test_bad_override_is_config_error(self, smoke_config, capsys):
        assert main(["--config", str(smoke_config), "--override",
                     "nope", "convert"]) == 2


class TestReproduce:
    def test_fig1_emits_artifacts(self, smoke_config, tmp_path):
        out = tmp_path / "out"
        assert main(["--config", str(smoke_config), "--out", str(out),
                     "reproduce", "fig1"]) == 0
        fig1 = out / "fig1"
        for name in ("poincare.csv", "pos_dist.csv", "mom_dist.csv",
                     "trace.csv", "plateaus.csv", "fits.csv", "report.txt",
                     "manifest.json"):
            assert (fig1 / name).is_file(), name

    def test_fig3_uses_fig1_profile(self, smoke_config, tmp_path):
        out = tmp_path / "out"
        main(["--config", str(smoke_config), "--out", str(out),
              "reproduce", "fig1"])
        assert main(["--config", str(smoke_config), "--out", str(out),
                     "reproduce", "fig3"]) == 0
        report = (out / "fig3" / "report.txt").read_text()
        assert "classical ensemble: 400 particles" in report
