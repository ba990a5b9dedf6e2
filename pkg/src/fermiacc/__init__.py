"""Quantum and classical dynamics of atoms bouncing on a modulated mirror.

The package simulates a cold atom falling under gravity onto a temporally
modulated evanescent-wave mirror: split-operator wavepacket propagation,
symplectic classical orbits and ensembles, Poincare sections, one-period
(Floquet) spectra, and the distribution diagnostics that quantify
dynamical localization.
"""

__version__ = "0.1.0"

from .units import (
    DimensionlessParams,
    LocalizationWindow,
    PhysicalParams,
    localization_window,
    to_dimensionless,
    to_physical,
)
from .classical import (
    ClassicalState,
    Ensemble,
    MomentTrace,
    PoincareSection,
    evolve_ensemble,
    force,
    hamiltonian,
    integrate_orbit,
    poincare_section,
    resonance_centers,
    sample_gaussian_ensemble,
)
from .quantum import (
    Absorber,
    DistributionProfile,
    Grid,
    ObservableTrace,
    Wavefunction,
    expectations,
    init_gaussian,
    momentum_distribution,
    position_distribution,
    propagate,
    split_step,
)
from .floquet import FloquetOperator, QuasiSpectrum, build_floquet, quasi_spectrum
from .analysis import (
    DecayFit,
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

__all__ = [name for name in dir() if not name.startswith("_")]
