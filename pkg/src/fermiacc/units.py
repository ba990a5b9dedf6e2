"""Unit conversions between SI experiment parameters and the dimensionless model.

The bouncing-atom Hamiltonian in SI units,

    H = p^2/(2m) + m g z' + (hbar Omega_eff / 4) exp(-2 k (z' - (eps/2k) sin(w t'))),

is rescaled with z = z' w^2/g, p = p' w/(m g), t = w t' into

    H = p^2/2 + z + V0 exp(-kappa (z - lam sin t)),

with the four dimensionless controls

    V0    = hbar w^2 Omega_eff / (4 m g^2)      (mirror intensity)
    kappa = 2 k g / w^2                         (mirror steepness)
    lam   = w^2 eps / (2 k g)                   (modulation amplitude)
    kbar  = hbar w^3 / (m g^2)                  (effective Planck constant)

kbar is the scale of the commutator [z, p] and controls how quantum the
dynamics is.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

HBAR = 1.054571817e-34  # J s (CODATA 2018)
STANDARD_GRAVITY = 9.81  # m / s^2

#: Lower edge of the modulation-amplitude window for dynamical localization.
#: Below this value classical diffusion never starts (resonances do not
#: overlap); the value comes from the Chirikov overlap estimate and is
#: treated as a constant of the model.
LAMBDA_LOWER = 0.24


def _require_positive(obj, fields) -> None:
    bad = [f for f in fields if not getattr(obj, f) > 0.0]
    if bad:
        raise ValueError(
            f"{type(obj).__name__}: fields must be strictly positive: {', '.join(bad)}"
        )


@dataclass(frozen=True)
class PhysicalParams:
    """SI description of the bouncing-atom experiment.

    Attributes
    ----------
    mass : float
        Atomic mass in kg.
    rabi_eff : float
        Effective Rabi frequency Omega_eff in rad/s (sets mirror intensity).
    decay_wavenumber : float
        Inverse decay length k of the evanescent field, 1/m.
    mod_frequency : float
        Mirror modulation angular frequency w, rad/s.
    mod_amplitude_eps : float
        Dimensionless modulation amplitude eps of the exponent.
    gravity : float
        Gravitational acceleration, m/s^2.
    hbar : float
        Planck constant over 2 pi, J s.
    """

    mass: float
    rabi_eff: float
    decay_wavenumber: float
    mod_frequency: float
    mod_amplitude_eps: float
    gravity: float = STANDARD_GRAVITY
    hbar: float = HBAR

    def __post_init__(self):
        _require_positive(
            self,
            ("mass", "rabi_eff", "decay_wavenumber", "mod_frequency",
             "gravity", "hbar"),
        )
        if self.mod_amplitude_eps < 0.0:
            raise ValueError("PhysicalParams: mod_amplitude_eps must be >= 0")


@dataclass(frozen=True)
class DimensionlessParams:
    """The four dimensionless controls (V0, kappa, lam, kbar)."""

    v0: float
    kappa: float
    lam: float
    kbar: float

    def __post_init__(self):
        _require_positive(self, ("v0", "kappa", "kbar"))
        if self.lam < 0.0:
            raise ValueError("DimensionlessParams: lam must be >= 0")

    def with_lam(self, lam: float) -> "DimensionlessParams":
        return replace(self, lam=lam)


@dataclass(frozen=True)
class LocalizationWindow:
    """Modulation-amplitude interval where dynamical localization occurs.

    The lower edge is the classical-diffusion onset (constant 0.24), the
    upper edge sqrt(kbar)/2 marks the transition of the quasi-energy
    spectrum from point-like to continuous.
    """

    lambda_lower: float
    lambda_upper: float
    is_empty: bool


def to_dimensionless(p: PhysicalParams) -> DimensionlessParams:
    """Convert SI experiment parameters to the four dimensionless controls."""
    w = p.mod_frequency
    mg2 = p.mass * p.gravity**2
    return DimensionlessParams(
        v0=p.hbar * w**2 * p.rabi_eff / (4.0 * mg2),
        kappa=2.0 * p.decay_wavenumber * p.gravity / w**2,
        lam=w**2 * p.mod_amplitude_eps / (2.0 * p.decay_wavenumber * p.gravity),
        kbar=p.hbar * w**3 / mg2,
    )


def to_physical(
    d: DimensionlessParams,
    mass: float,
    gravity: float = STANDARD_GRAVITY,
    mod_frequency: float | None = None,
) -> PhysicalParams:
    """Invert the scalings given the three SI anchors (mass, gravity, w).

    The anchors fix the unit system; the remaining SI fields, including the
    value of hbar implied by kbar, then follow uniquely.  Round-tripping
    through :func:`to_dimensionless` reproduces ``d`` to machine precision.
    """
    if mod_frequency is None:
        raise ValueError("to_physical: mod_frequency anchor is required")
    if not (mass > 0.0 and gravity > 0.0 and mod_frequency > 0.0):
        raise ValueError("to_physical: anchors must be strictly positive")
    w = mod_frequency
    mg2 = mass * gravity**2
    hbar = d.kbar * mg2 / w**3
    return PhysicalParams(
        mass=mass,
        rabi_eff=4.0 * d.v0 * w / d.kbar,
        decay_wavenumber=d.kappa * w**2 / (2.0 * gravity),
        mod_frequency=w,
        mod_amplitude_eps=d.lam * d.kappa,
        gravity=gravity,
        hbar=hbar,
    )


def localization_window(d: DimensionlessParams) -> LocalizationWindow:
    """Localization window 0.24 < lam < sqrt(kbar)/2 for the given kbar.

    The window is empty when the upper edge does not exceed the lower one
    (kbar <= 0.2304 up to rounding).
    """
    upper = d.kbar**0.5 / 2.0
    # tolerance absorbs floating-point rounding exactly at the boundary
    empty = upper <= LAMBDA_LOWER * (1.0 + 1e-12)
    return LocalizationWindow(lambda_lower=LAMBDA_LOWER, lambda_upper=upper, is_empty=empty)


def cesium_set_kbar4() -> PhysicalParams:
    """Cesium parameter set targeting (kbar, kappa, V0) = (4, 0.5, 4)."""
    import math

    return PhysicalParams(
        mass=2.21e-25,
        rabi_eff=2 * math.pi * 5.9e3,
        decay_wavenumber=1.0 / 0.455e-6,
        mod_frequency=2 * math.pi * 1.477e3,
        mod_amplitude_eps=0.2,
    )


def cesium_set_kbar1() -> PhysicalParams:
    """Cesium parameter set targeting (kbar, kappa, V0) = (1, 0.5, 4)."""
    import math

    return PhysicalParams(
        mass=2.21e-25,
        rabi_eff=2 * math.pi * 14.9e3,
        decay_wavenumber=1.0 / 1.148e-6,
        mod_frequency=2 * math.pi * 0.93e3,
        mod_amplitude_eps=0.2,
    )
