"""Classical dynamics of the driven bouncer: orbits, sections, ensembles.

All quantities are dimensionless (see :mod:`fermiacc.units`): gravity is 1,
the drive period is 2*pi, and the Hamiltonian reads

    H(z, p, t) = p^2/2 + z + V0 exp(-kappa (z - lam sin t)).

Orbits are advanced with a kick-drift-kick Stoermer-Verlet splitting whose
force is evaluated at step midpoints (second order for the driven mirror,
symplectic for lam = 0), implemented in :mod:`fermiacc._kernels`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from ._kernels import EXP_CLAMP, evolve_segment, run_steps, step_plan
from .units import DimensionlessParams

TWO_PI = 2.0 * math.pi

#: Default integrator step: 2000 steps per drive period.
DEFAULT_DT = TWO_PI / 2000.0

#: Escape guards, far outside the physically relevant phase-space region.
P_GUARD = 200.0
Z_GUARD = 4000.0


class OrbitEscapedError(RuntimeError):
    """An orbit left the guarded phase-space region."""


class AllOrbitsEscapedError(RuntimeError):
    """Every seed of a Poincare section escaped before recording a point."""


class EnsembleEscapeError(RuntimeError):
    """More than half of an ensemble escaped the guards."""


@dataclass(frozen=True)
class ClassicalState:
    z: float
    p: float
    t: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.z) and math.isfinite(self.p) and math.isfinite(self.t)):
            raise ValueError("ClassicalState fields must be finite")


@dataclass
class Ensemble:
    """A set of particles sharing one clock, stored as parallel arrays.

    The particle order is fixed at construction and preserved by evolution,
    so results are independent of any internal parallel schedule.
    """

    z: np.ndarray
    p: np.ndarray
    t: float
    rng_seed: int
    escaped: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        self.z = np.asarray(self.z, dtype=np.float64)
        self.p = np.asarray(self.p, dtype=np.float64)
        if self.z.shape != self.p.shape or self.z.ndim != 1 or self.z.size == 0:
            raise ValueError("Ensemble arrays must be equal-length, non-empty 1-d")
        if self.escaped is None:
            self.escaped = np.zeros(self.z.shape, dtype=np.bool_)

    def __len__(self) -> int:
        return self.z.size

    @property
    def n_escaped(self) -> int:
        return int(self.escaped.sum())

    def state(self, i: int) -> ClassicalState:
        return ClassicalState(float(self.z[i]), float(self.p[i]), self.t)


@dataclass
class PoincareSection:
    """Stroboscopic (z, p) samples at t = 2 pi n, sin t = 0 rising."""

    orbit: np.ndarray   # seed index of each recorded point
    z: np.ndarray
    p: np.ndarray
    n_orbits: int
    n_periods: int
    lam: float
    n_escaped: int = 0


@dataclass
class MomentTrace:
    times: np.ndarray
    mean_z: np.ndarray
    mean_p: np.ndarray
    var_z: np.ndarray
    var_p: np.ndarray

    def __post_init__(self):
        n = len(self.times)
        for name in ("mean_z", "mean_p", "var_z", "var_p"):
            if len(getattr(self, name)) != n:
                raise ValueError("MomentTrace series must have equal lengths")


class ResonanceCenter(NamedTuple):
    index: int
    p: float    # bounce momentum pi*N
    z: float    # turning height (pi*N)^2 / 2


def force(z, t, d: DimensionlessParams):
    """Force -dH/dz = -1 + V0 kappa exp(-kappa (z - lam sin t)).

    The exponent is clamped at +700 so deeply negative z cannot overflow;
    orbits that reach the clamp regime are treated as escaped by the
    integrator.
    """
    a = -d.kappa * (np.asarray(z, dtype=np.float64) - d.lam * np.sin(t))
    a = np.minimum(a, EXP_CLAMP)
    out = -1.0 + d.v0 * d.kappa * np.exp(a)
    return float(out) if np.isscalar(z) else out


def hamiltonian(z, p, t, d: DimensionlessParams):
    """Total energy p^2/2 + z + V0 exp(-kappa (z - lam sin t))."""
    a = -d.kappa * (np.asarray(z, dtype=np.float64) - d.lam * np.sin(t))
    a = np.minimum(a, EXP_CLAMP)
    out = np.asarray(p, dtype=np.float64) ** 2 / 2.0 + np.asarray(z) + d.v0 * np.exp(a)
    return float(out) if np.isscalar(z) else out


def integrate_orbit(
    s: ClassicalState,
    t_final: float,
    dt: float,
    d: DimensionlessParams,
    p_guard: float = P_GUARD,
    z_guard: float = Z_GUARD,
) -> ClassicalState:
    """Advance a single orbit to exactly ``t_final``.

    Full steps of ``dt`` are taken, with one final partial step.  Raises
    :class:`OrbitEscapedError` when the orbit leaves the guard region.
    """
    if dt <= 0.0:
        raise ValueError("integrate_orbit: dt must be positive")
    if t_final <= s.t:
        raise ValueError("integrate_orbit: t_final must exceed the state's time")
    z = np.array([s.z])
    p = np.array([s.p])
    esc = np.zeros(1, dtype=np.bool_)
    evolve_segment(z, p, esc, s.t, t_final, dt, d, p_guard, z_guard)
    if esc[0]:
        raise OrbitEscapedError(
            f"orbit escaped guards (|p|>{p_guard} or z outside range) "
            f"before t={t_final}"
        )
    return ClassicalState(float(z[0]), float(p[0]), t_final)


def poincare_section(
    seeds: Sequence[ClassicalState] | Iterable[ClassicalState],
    n_periods: int,
    dt: float,
    d: DimensionlessParams,
    p_guard: float = P_GUARD,
    z_guard: float = Z_GUARD,
) -> PoincareSection:
    """Record (z, p) of every orbit at t = 2 pi n for n = 1..n_periods.

    Seeds must be at t = 0.  Escaped orbits stop contributing points; their
    count is reported on the returned section.
    """
    seeds = list(seeds)
    if n_periods < 1:
        raise ValueError("poincare_section: n_periods must be >= 1")
    if any(s.t != 0.0 for s in seeds):
        raise ValueError("poincare_section: seeds must be at t = 0")
    z = np.array([s.z for s in seeds])
    p = np.array([s.p for s in seeds])
    esc = np.zeros(len(seeds), dtype=np.bool_)
    orbit_ids = np.arange(len(seeds))
    rec_orbit, rec_z, rec_p = [], [], []
    for n in range(1, n_periods + 1):
        evolve_segment(z, p, esc, TWO_PI * (n - 1), TWO_PI * n, dt, d,
                       p_guard, z_guard)
        alive = ~esc
        if not alive.any():
            break
        rec_orbit.append(orbit_ids[alive].copy())
        rec_z.append(z[alive].copy())
        rec_p.append(p[alive].copy())
    if not rec_orbit:
        raise AllOrbitsEscapedError("all orbits escaped before the first section")
    return PoincareSection(
        orbit=np.concatenate(rec_orbit),
        z=np.concatenate(rec_z),
        p=np.concatenate(rec_p),
        n_orbits=len(seeds),
        n_periods=n_periods,
        lam=d.lam,
        n_escaped=int(esc.sum()),
    )


def resonance_centers(d: DimensionlessParams, n_max: int) -> list[ResonanceCenter]:
    """Nominal primary-resonance labels from the thin-mirror bounce model.

    A bounce launched from the mirror with momentum p returns after time
    2 p (gravity is 1), so resonance N has bounce momentum p_N = pi N and
    turning height z_N = (pi N)^2 / 2.  The labels assume the mirror is
    thin compared to the orbit; a shallow mirror (small kappa) lengthens
    the true bounce period and shifts the actual islands below these
    values (see :func:`static_resonance_energy` for the exact statics).
    """
    if n_max < 1:
        raise ValueError("resonance_centers: n_max must be >= 1")
    return [
        ResonanceCenter(n, math.pi * n, (math.pi * n) ** 2 / 2.0)
        for n in range(1, n_max + 1)
    ]


def sample_gaussian_ensemble(
    z0: float, p0: float, dz: float, dp: float, n: int, seed: int
) -> Ensemble:
    """Independent normal samples, mean (z0, p0), std (dz, dp)."""
    if not (dz > 0.0 and dp > 0.0):
        raise ValueError("sample_gaussian_ensemble: dz and dp must be positive")
    if n < 1:
        raise ValueError("sample_gaussian_ensemble: n must be >= 1")
    rng = np.random.default_rng(seed)
    return Ensemble(
        z=z0 + dz * rng.standard_normal(n),
        p=p0 + dp * rng.standard_normal(n),
        t=0.0,
        rng_seed=seed,
    )


def evolve_ensemble(
    e: Ensemble,
    t_final: float,
    dt: float,
    d: DimensionlessParams,
    record_every: float,
    p_guard: float = P_GUARD,
    z_guard: float = Z_GUARD,
) -> tuple[Ensemble, MomentTrace]:
    """Propagate every particle independently and record moment series.

    Moments are taken over non-escaped particles every ``record_every``
    time units (plus the initial and final instants).  The particle order
    is preserved, so the result depends only on the inputs.  Raises
    :class:`EnsembleEscapeError` if more than half the particles escape.
    """
    if t_final <= e.t:
        raise ValueError("evolve_ensemble: t_final must exceed ensemble time")
    if record_every <= 0.0:
        raise ValueError("evolve_ensemble: record_every must be positive")
    z = e.z.copy()
    p = e.p.copy()
    esc = e.escaped.copy()
    times, mz, mp, vz, vp = [], [], [], [], []

    def record(t):
        alive = ~esc
        times.append(t)
        mz.append(z[alive].mean())
        mp.append(p[alive].mean())
        vz.append(z[alive].var())
        vp.append(p[alive].var())

    record(e.t)
    # records snap to whole steps so that segmented evolution reproduces an
    # uninterrupted run bit for bit (global step index, no partial steps
    # except the final one)
    n_full, rem = step_plan(t_final - e.t, dt)
    steps_per_rec = max(1, int(round(record_every / dt)))
    done = 0
    while done < n_full:
        m = min(steps_per_rec, n_full - done)
        run_steps(z, p, esc, e.t, done, m, dt, d, p_guard, z_guard)
        done += m
        if esc.all():
            raise EnsembleEscapeError("all particles escaped")
        record(e.t + done * dt)
    if rem > 0.0:
        run_steps(z, p, esc, e.t + n_full * dt, 0, 1, rem, d, p_guard, z_guard)
        if esc.all():
            raise EnsembleEscapeError("all particles escaped")
        record(t_final)
    out = Ensemble(z=z, p=p, t=t_final, rng_seed=e.rng_seed, escaped=esc)
    if out.n_escaped > 0.5 * len(out):
        raise EnsembleEscapeError(
            f"{out.n_escaped} of {len(out)} particles escaped (> 50%)"
        )
    trace = MomentTrace(
        times=np.array(times),
        mean_z=np.array(mz),
        mean_p=np.array(mp),
        var_z=np.array(vz),
        var_p=np.array(vp),
    )
    return out, trace


# ---------------------------------------------------------------------------
# static-mirror orbit structure (lam = 0)

def static_potential_min(d: DimensionlessParams) -> tuple[float, float]:
    """Location and value of the static potential minimum.

    z* = ln(V0 kappa)/kappa, where the mirror force balances gravity.
    """
    zstar = math.log(d.v0 * d.kappa) / d.kappa
    return zstar, zstar + d.v0 * math.exp(-d.kappa * zstar)


def static_bounce_period(energy: float, d: DimensionlessParams) -> float:
    """Oscillation period of the static (lam = 0) orbit at the given energy.

    Computed by quadrature of dz/p between the turning points, with a
    sqrt substitution removing the endpoint singularities.
    """
    zstar, emin = static_potential_min(d)
    if energy <= emin:
        raise ValueError("static_bounce_period: energy below potential minimum")

    def u_pot(zz):
        a = min(-d.kappa * zz, EXP_CLAMP)
        return zz + d.v0 * math.exp(a)

    zlo = brentq(lambda zz: u_pot(zz) - energy, zstar - 2 * EXP_CLAMP / d.kappa, zstar)
    zhi = brentq(lambda zz: u_pot(zz) - energy, zstar, zstar + 2 * energy + 10.0)

    def integrand(u):
        zz = zlo + (zhi - zlo) * math.sin(u) ** 2
        den = max(2.0 * (energy - u_pot(zz)), 1e-14)
        return 4.0 * (zhi - zlo) * math.sin(u) * math.cos(u) / math.sqrt(den)

    # the substitution regularizes both turning points; quad still reports
    # slow convergence near the mirror-side endpoint, harmless at the
    # accuracy used here (cross-checked against the harmonic limit and the
    # stroboscopic fixed points in the tests)
    import warnings
    from scipy.integrate import IntegrationWarning

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IntegrationWarning)
        return quad(integrand, 0.0, math.pi / 2.0, limit=400)[0]


def static_resonance_energy(n: int, d: DimensionlessParams) -> float:
    """Energy whose static bounce period equals n drive periods.

    Raises ValueError when no such orbit exists (the harmonic period at
    the potential bottom, 2 pi / sqrt(kappa), already exceeds 2 pi n).
    """
    _, emin = static_potential_min(d)
    t_target = TWO_PI * n
    t_harm = TWO_PI / math.sqrt(d.kappa)
    if t_target <= t_harm * (1 + 1e-9):
        raise ValueError(
            f"resonance {n} does not exist: harmonic period {t_harm:.3f} "
            f"exceeds {t_target:.3f}"
        )
    return brentq(
        lambda en: static_bounce_period(en, d) - t_target,
        emin + 1e-9,
        3.0 * (math.pi * n) ** 2,
    )


# ---------------------------------------------------------------------------
# island geometry on the stroboscopic section

def stroboscopic_map(
    x: tuple[float, float], d: DimensionlessParams, n_periods: int = 1,
    dt: float = DEFAULT_DT,
) -> tuple[float, float]:
    """Map (z, p) at section phase t=0 over ``n_periods`` drive periods."""
    z = np.array([x[0]])
    p = np.array([x[1]])
    esc = np.zeros(1, dtype=np.bool_)
    for n in range(1, n_periods + 1):
        evolve_segment(z, p, esc, TWO_PI * (n - 1), TWO_PI * n, dt, d,
                       P_GUARD, Z_GUARD)
    if esc[0]:
        raise OrbitEscapedError("orbit escaped during stroboscopic map")
    return float(z[0]), float(p[0])


def island_center_guess(n: int, d: DimensionlessParams) -> tuple[float, float]:
    """Analytic seed for the period-n island center at section phase 0.

    Uses the static resonance energy and the stable bounce phase pi/2 of
    the thin-mirror map, then picks the section point closest to the
    orbit apex (the visually topmost island of the chain).
    """
    energy = static_resonance_energy(n, d)
    p_bounce = math.sqrt(2.0 * energy)
    best = None
    for j in range(1, n + 1):
        tau = TWO_PI * j - math.pi / 2.0
        zg = p_bounce * tau - tau**2 / 2.0
        pg = p_bounce - tau
        if best is None or zg > best[0]:
            best = (zg, pg)
    return best


def find_island_center(
    d: DimensionlessParams,
    n: int,
    dt: float = DEFAULT_DT,
    guess: tuple[float, float] | None = None,
    tol: float = 1e-10,
    max_iter: int = 60,
) -> tuple[float, float]:
    """Locate the period-n island center as a fixed point of the n-period map.

    Damped Newton iteration with finite-difference Jacobian.  Requires
    lam > 0 (at lam = 0 fixed points are degenerate along the resonant
    torus).  Returns section coordinates (z, p) at phase t = 0.
    """
    if d.lam <= 0.0:
        raise ValueError("find_island_center: requires lam > 0")
    x = np.array(guess if guess is not None else island_center_guess(n, d))

    def gfun(xx):
        fz, fp = stroboscopic_map((xx[0], xx[1]), d, n, dt)
        return np.array([fz - xx[0], fp - xx[1]])

    g = gfun(x)
    for _ in range(max_iter):
        res = np.abs(g).max()
        if res < tol:
            break
        jac = np.empty((2, 2))
        for j in range(2):
            h = 1e-6 * max(1.0, abs(x[j]))
            xp = x.copy()
            xp[j] += h
            jac[:, j] = (gfun(xp) - g) / h
        try:
            step = np.linalg.solve(jac, -g)
        except np.linalg.LinAlgError as exc:
            raise RuntimeError("find_island_center: singular Jacobian") from exc
        scale = 1.0
        for _ in range(10):
            g_new = gfun(x + scale * step)
            if np.abs(g_new).max() < res:
                break
            scale *= 0.5
        x = x + scale * step
        g = g_new
    else:
        raise RuntimeError(
            f"find_island_center: no convergence for n={n} (residual {np.abs(g).max():.2e})"
        )
    return float(x[0]), float(x[1])


def orbit_apex(x: tuple[float, float], d: DimensionlessParams,
               n_periods: int = 1, dt: float = DEFAULT_DT) -> float:
    """Maximum z reached by the orbit through section point ``x`` over one
    map period (the turning height of the underlying bounce orbit)."""
    z = np.array([x[0]])
    p = np.array([x[1]])
    esc = np.zeros(1, dtype=np.bool_)
    apex = x[0]
    steps_per = int(round(TWO_PI / dt))
    sub = max(1, steps_per // 200)
    for k in range(0, n_periods * steps_per, sub):
        evolve_segment(z, p, esc, k * dt, (k + sub) * dt, dt, d, P_GUARD, Z_GUARD)
        if esc[0]:
            raise OrbitEscapedError("orbit escaped while measuring apex")
        apex = max(apex, float(z[0]))
    return apex


def _is_trapped(seed, center, energy, d, n, dt, n_iter) -> bool:
    # librating orbits hug the island; anything else wanders along (or off)
    # the energy contour, far from the center in the scaled metric
    w_z = max(energy / 2.0, 1.0)
    w_p = max(math.sqrt(2.0 * energy) / 2.0, 1.0)
    z = np.array([seed[0]])
    p = np.array([seed[1]])
    esc = np.zeros(1, dtype=np.bool_)
    for _ in range(n_iter):
        for m in range(1, n + 1):
            evolve_segment(z, p, esc, TWO_PI * (m - 1), TWO_PI * m, dt, d,
                           P_GUARD, Z_GUARD)
        if esc[0]:
            return False
        dist = math.hypot((z[0] - center[0]) / w_z, (p[0] - center[1]) / w_p)
        if dist > 0.8:
            return False
    return True


def island_halfwidth(
    d: DimensionlessParams,
    n: int,
    center: tuple[float, float] | None = None,
    dt: float = DEFAULT_DT,
    step: float = 0.25,
    s_max: float = 20.0,
    n_iter: int = 150,
) -> float:
    """Half-extent in z of the stable island around the period-n center.

    Seeds are scanned outward from the center along +/- z at the center's
    p; the half-width is the mean of the last trapped displacement on each
    side (trapping = the n-period stroboscopic iterates stay near the
    center rather than sliding along the energy contour).
    """
    if center is None:
        center = find_island_center(d, n, dt=dt)
    energy = hamiltonian(center[0], center[1], 0.0, d)
    halves = []
    for sign in (+1.0, -1.0):
        extent = 0.0
        s = step
        while s <= s_max:
            if _is_trapped((center[0] + sign * s, center[1]), center, energy,
                           d, n, dt, n_iter):
                extent = s
            else:
                break
            s += step
        halves.append(extent + step / 2.0)
    return 0.5 * (halves[0] + halves[1])
