"""Shared fixtures: flagship-run artifacts computed once per session.

The full-scale runs (quantum t=1000 on the default grid, the 60000
particle ensemble, the Floquet operator pair) are expensive, so they are
session-scoped and shared between the module tests and the acceptance
suite.  Set FERMIACC_TEST_CACHE=1 to memoize them on disk between local
sessions (developer convenience; CI should run cold).
"""

from __future__ import annotations

import math
import os
import pickle
from pathlib import Path

import pytest

from fermiacc.config import parse_config
from fermiacc import recipes
from fermiacc.quantum import Grid
from fermiacc.floquet import build_floquet, quasi_spectrum, static_basis

TWO_PI = 2.0 * math.pi

FLAGSHIP_CONFIG = """
[dimensionless]
v0 = 4.0
kappa = 0.5
lambda = 0.4
kbar = 1.0

[initial]
z0 = 20.0
p0 = 0.0
dz = 0.5
n_particles = 60000
seed = 20260810

[run]
t_final = 1000.0
record_every = 6.283185307179586
"""


def flagship_config():
    return parse_config(FLAGSHIP_CONFIG)


def _cache_dir() -> Path | None:
    if os.environ.get("FERMIACC_TEST_CACHE", "") != "1":
        return None
    d = Path(__file__).resolve().parent.parent / ".pytest_artifacts"
    d.mkdir(exist_ok=True)
    return d


def _memo(name, builder):
    cache = _cache_dir()
    if cache is None:
        return builder()
    path = cache / f"{name}.pkl"
    if path.is_file():
        with open(path, "rb") as fh:
            return pickle.load(fh)
    obj = builder()
    with open(path, "wb") as fh:
        pickle.dump(obj, fh)
    return obj


@pytest.fixture(scope="session")
def fig1(tmp_path_factory):
    """Full-scale fig1 pipeline artifacts (section, quantum run, analysis)."""

    def build():
        out = tmp_path_factory.mktemp("fig1")
        return recipes.reproduce_fig1(flagship_config(), out)

    return _memo("fig1", build)


@pytest.fixture(scope="session")
def fig2(fig1, tmp_path_factory):
    """kbar=4 variant, with the cross-kbar scan against fig1."""

    def build():
        out = tmp_path_factory.mktemp("fig2")
        return recipes.reproduce_fig2(flagship_config(), out,
                                      fig1_pos=fig1.quantum.pos)

    return _memo("fig2", build)


@pytest.fixture(scope="session")
def fig3(fig1, tmp_path_factory):
    """60000-particle classical ensemble with quantum comparison."""

    def build():
        out = tmp_path_factory.mktemp("fig3")
        return recipes.reproduce_fig3(flagship_config(), out,
                                      quantum_pos=fig1.quantum.pos)

    return _memo("fig3", build)


@pytest.fixture(scope="session")
def floquet_pair():
    """Floquet operators and spectra at lam = 0.4 and lam = 0.7, kbar = 1."""

    def build():
        cfg = flagship_config()
        fb = cfg.floquet
        grid = Grid(fb.grid_zmin, fb.grid_zmax, fb.grid_points)
        basis = static_basis(grid, cfg.params.with_lam(0.0), fb.basis_dim)
        out = {}
        for lam in (0.4, 0.7):
            op = build_floquet(cfg.params.with_lam(lam), grid, fb.basis_dim,
                               dt=fb.dt, basis=basis)
            out[lam] = (op, quasi_spectrum(op))
        return out

    return _memo("floquet_pair", build)


# --- acceptance reporting -------------------------------------------------

_ACCEPTANCE: list[tuple[int, str, bool]] = []


@pytest.fixture
def acceptance():
    """Record one pass/fail line per acceptance criterion."""

    def record(number: int, description: str, passed: bool, detail: str = ""):
        _ACCEPTANCE.append((number, description, bool(passed)))
        tag = "PASS" if passed else "FAIL"
        print(f"ACCEPTANCE {number:2d} [{tag}] {description}"
              + (f" ({detail})" if detail else ""))
        assert passed, f"acceptance criterion {number}: {description} {detail}"

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, desc, passed in sorted(_ACCEPTANCE):
        tag = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"  {number:2d} [{tag}] {desc}")
