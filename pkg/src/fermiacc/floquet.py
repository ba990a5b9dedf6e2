"""One-period evolution operator in the static eigenbasis and its spectrum.

The basis is the set of lowest eigenvectors of the static (lam = 0)
Hamiltonian, discretized on the quantum grid with the same spectral
kinetic operator the propagator uses.  Each basis vector is propagated
over one drive period and projected back; the inverse participation ratio
of the eigenvectors of the resulting matrix then distinguishes spectra
that are point-like (localized over the unperturbed ladder) from
quasi-continuous ones.

Columns whose energy lies near the truncation edge inevitably leak under
driving; their norm deficits are reported so analyses can restrict
themselves to the converged block.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft

from .quantum import Grid, Wavefunction, PotentialFn, _default_potential_fn
from .units import DimensionlessParams

TWO_PI = 2.0 * math.pi

#: Default build step; eigenphase discretization error is O(dt^2).
DEFAULT_DT = TWO_PI / 1000.0


@dataclass
class StaticBasis:
    """Lowest eigenpairs of the static Hamiltonian on a grid (l2-orthonormal)."""

    grid: Grid
    kbar: float
    energies: np.ndarray        # (dim,)
    vectors: np.ndarray         # (n_points, dim), real

    @property
    def dim(self) -> int:
        return self.energies.size

    def project(self, amp: np.ndarray) -> np.ndarray:
        """l2 coefficients of a grid vector in the basis."""
        return self.vectors.T @ amp

    def capture_dim(self, psi: Wavefunction, tail: float = 1e-8) -> int:
        """Smallest basis size containing all but ``tail`` of the state."""
        c = self.project(psi.amp)
        w = np.abs(c) ** 2
        w = w / (np.abs(psi.amp) ** 2).sum()
        cum = np.cumsum(w)
        idx = int(np.searchsorted(cum, 1.0 - tail))
        if idx >= self.dim:
            raise ValueError("basis does not capture the state to the requested tail")
        return idx + 1


@dataclass
class FloquetOperator:
    """Projected one-period propagator, column j = one period of basis j."""

    matrix: np.ndarray          # (dim, dim) complex
    params: DimensionlessParams
    basis: StaticBasis
    dt: float
    section_phase: float = 0.0
    period: float = TWO_PI

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def column_deficits(self) -> np.ndarray:
        """1 - column norm^2; the truncation leakage of each column."""
        return 1.0 - (np.abs(self.matrix) ** 2).sum(axis=0)

    @property
    def truncation_quality(self) -> float:
        """Worst column-norm deficit (large near the truncation edge)."""
        return float(np.abs(self.column_deficits).max())

    def block_deficit(self, n_cols: int) -> float:
        """Worst column deficit among the first ``n_cols`` columns."""
        return float(np.abs(self.column_deficits[:n_cols]).max())


@dataclass
class QuasiSpectrum:
    eigenphases: np.ndarray     # sorted, in [0, 2 pi)
    ipr: np.ndarray             # inverse participation ratio per eigenvector
    dominant: np.ndarray        # basis index with the largest weight


def static_hamiltonian_matrix(grid: Grid, d: DimensionlessParams) -> np.ndarray:
    """Dense static Hamiltonian: circulant spectral kinetic part + potential.

    The kinetic block is exactly the operator the split-step propagator
    applies (F^-1 diag(p^2/2) F), so the basis is consistent with the
    dynamics up to splitting error.
    """
    n = grid.n_points
    p = grid.momenta(d.kbar)
    row = sfft.ifft(p**2 / 2.0).real
    idx = (np.arange(n)[:, None] - np.arange(n)[None, :]) % n
    ham = row[idx]
    zc = grid.z
    ham[np.diag_indices(n)] += zc + d.v0 * np.exp(-d.kappa * zc)
    return ham


def static_basis(grid: Grid, d: DimensionlessParams, basis_dim: int) -> StaticBasis:
    """Lowest ``basis_dim`` eigenpairs of the static Hamiltonian."""
    if basis_dim > grid.n_points:
        raise ValueError("static_basis: basis_dim exceeds grid size")
    ham = static_hamiltonian_matrix(grid, d)
    energies, vectors = np.linalg.eigh(ham)
    return StaticBasis(
        grid=grid,
        kbar=d.kbar,
        energies=energies[:basis_dim].copy(),
        vectors=np.ascontiguousarray(vectors[:, :basis_dim]),
    )


def _evolve_columns(cols, grid, kbar, t0, n_steps, dt, potential_fn):
    """Merged Strang evolution of a (n_points, m) column block."""
    p = grid.momenta(kbar)[:, None]
    z = grid.z
    kin_half = np.exp(-1j * p**2 * dt / (4.0 * kbar))
    kin_full = kin_half * kin_half
    dtk = dt / kbar
    cols = sfft.ifft(kin_half * sfft.fft(cols, axis=0), axis=0)
    for k in range(n_steps):
        cols *= np.exp(-1j * potential_fn(z, t0 + k * dt + dt / 2.0) * dtk)[:, None]
        f = sfft.fft(cols, axis=0)
        f *= kin_full if k < n_steps - 1 else kin_half
        cols = sfft.ifft(f, axis=0)
    return cols


def build_floquet(
    d: DimensionlessParams,
    grid: Grid,
    basis_dim: int,
    dt: float = DEFAULT_DT,
    section_phase: float = 0.0,
    basis: StaticBasis | None = None,
    potential_fn: PotentialFn | None = None,
) -> FloquetOperator:
    """Propagate every basis vector over one period and project back.

    ``section_phase`` shifts the period start; the eigenphase multiset is
    conjugation-invariant under this shift up to truncation effects.
    """
    if basis is None:
        basis = static_basis(grid, d, basis_dim)
    elif basis.dim < basis_dim:
        raise ValueError("build_floquet: provided basis smaller than basis_dim")
    if potential_fn is None:
        potential_fn = _default_potential_fn(d, grid)
    n_steps = int(round(TWO_PI / dt))
    cols = basis.vectors[:, :basis_dim].astype(np.complex128)
    cols = _evolve_columns(cols, grid, d.kbar, section_phase, n_steps,
                           TWO_PI / n_steps, potential_fn)
    matrix = basis.vectors[:, :basis_dim].T @ cols
    return FloquetOperator(
        matrix=matrix,
        params=d,
        basis=basis,
        dt=TWO_PI / n_steps,
        section_phase=section_phase,
    )


def quasi_spectrum(
    op: FloquetOperator,
    max_column_deficit: float = 1e-6,
    min_converged_fraction: float = 0.5,
) -> QuasiSpectrum:
    """Eigenphases (sorted) and per-eigenvector IPR of the projected operator.

    IPR = sum |c|^4 of a unit eigenvector: 1 for a basis state, 1/dim for
    maximal spreading.  The input is rejected when fewer than
    ``min_converged_fraction`` of the columns are unitary to
    ``max_column_deficit`` -- that means the basis is too small even for
    the interior dynamics.
    """
    deficits = np.abs(op.column_deficits)
    converged = float((deficits <= max_column_deficit).mean())
    if converged < min_converged_fraction:
        raise ValueError(
            f"quasi_spectrum: only {converged:.0%} of columns are unitary to "
            f"{max_column_deficit:g}; increase basis_dim or the grid"
        )
    vals, vecs = np.linalg.eig(op.matrix)
    phases = np.mod(np.angle(vals), TWO_PI)
    weights = np.abs(vecs) ** 2
    ipr = (weights**2).sum(axis=0) / weights.sum(axis=0) ** 2
    dominant = weights.argmax(axis=0)
    order = np.argsort(phases, kind="stable")
    return QuasiSpectrum(
        eigenphases=phases[order],
        ipr=ipr[order],
        dominant=dominant[order],
    )
