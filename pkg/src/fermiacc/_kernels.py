"""Numba-compiled stepping kernels for the classical dynamics.

The integrator is a kick-drift-kick (Stoermer-Verlet) splitting with the
time-dependent force evaluated at the midpoint of each step, which keeps
the scheme second order for the driven mirror.  Particles are independent;
the parallel loop writes each particle back by its own index only, so the
results are bit-identical for any thread count.

Step times are computed as t_offset + (step0 + k) * dt from a global step
index, never accumulated, so splitting a run into recording segments
reproduces exactly the floating-point sequence of an uninterrupted run.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit, prange

#: Clamp on the exponent of the mirror term before exponentiation.
EXP_CLAMP = 700.0


@njit(cache=True, parallel=True)
def kdk_steps(z, p, escaped, t_offset, step0, n_steps, dt, v0, kappa, lam,
              p_guard, z_guard, z_floor):  # pragma: no cover - compiled
    """Advance all non-escaped particles by ``n_steps`` steps of size ``dt``.

    Arrays are modified in place; ``escaped`` is set for particles whose
    |p| exceeds ``p_guard``, whose z leaves (``z_floor``, ``z_guard``) or
    that stop being finite.  Escaped particles freeze at their last state.
    """
    half = 0.5 * dt
    for i in prange(z.shape[0]):
        if escaped[i]:
            continue
        zi = z[i]
        pi = p[i]
        for k in range(n_steps):
            th = t_offset + (step0 + k) * dt + half
            s = lam * np.sin(th)
            a = -kappa * (zi - s)
            if a > EXP_CLAMP:
                a = EXP_CLAMP
            pi += half * (-1.0 + v0 * kappa * np.exp(a))
            zi += dt * pi
            a = -kappa * (zi - s)
            if a > EXP_CLAMP:
                a = EXP_CLAMP
            pi += half * (-1.0 + v0 * kappa * np.exp(a))
            if (
                abs(pi) > p_guard
                or zi > z_guard
                or zi < z_floor
                or zi != zi
                or pi != pi
            ):
                escaped[i] = True
                break
        z[i] = zi
        p[i] = pi


def step_plan(span: float, dt: float) -> tuple[int, float]:
    """Number of full steps and the final partial step covering ``span``."""
    n_full = int(math.floor(span / dt + 1e-9))
    rem = span - n_full * dt
    if rem <= 1e-12 * max(1.0, abs(span)):
        rem = 0.0
    return n_full, rem


def run_steps(z, p, escaped, t_offset, step0, n_steps, dt, d,
              p_guard, z_guard) -> None:
    """Thin wrapper passing the model parameters to the compiled kernel."""
    if n_steps <= 0:
        return
    z_floor = d.lam - EXP_CLAMP / d.kappa
    kdk_steps(z, p, escaped, t_offset, step0, n_steps, dt, d.v0, d.kappa,
              d.lam, p_guard, z_guard, z_floor)


def evolve_segment(z, p, escaped, t_start, t_end, dt, d, p_guard, z_guard) -> None:
    """Advance arrays from ``t_start`` to exactly ``t_end`` (plus partial step)."""
    if t_end < t_start - 1e-15:
        raise ValueError("evolve_segment: t_end must be >= t_start")
    n_full, rem = step_plan(t_end - t_start, dt)
    run_steps(z, p, escaped, t_start, 0, n_full, dt, d, p_guard, z_guard)
    if rem > 0.0:
        run_steps(z, p, escaped, t_start + n_full * dt, 0, 1, rem, d,
                  p_guard, z_guard)
