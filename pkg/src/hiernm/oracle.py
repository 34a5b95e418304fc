"""Brute-force propagator from the amplitude equations of motion.

The single-excitation amplitudes obey

    A' = -i kappa B
    B' = -i kappa A - int_0^t alpha(t - s) B(s) ds

For the exponential kernel the memory integral is carried by an auxiliary
variable z(t) = int_0^t exp(-lam (t - s)) B(s) ds with z' = B - lam z, which
turns the integro-differential system into three local ODEs. These are
stepped with the classical fourth-order Runge-Kutta scheme. Nothing here
shares code with the Laplace-domain solution in :mod:`hiernm.propagator`.
"""
from __future__ import annotations

from typing import Callable, NamedTuple

import numpy as np

from .model import ModelError, PhysParams, TimeGrid

NORM_TOL = 1e-8

_trapezoid = getattr(np, "trapezoid", None) or np.trapz


class IntegratorOrderError(RuntimeError):
    pass


class NormConservationError(RuntimeError):
    pass


class AmplitudeState(NamedTuple):
    """Qubit amplitude A, cavity amplitude B and memory variable z."""

    a_amp: complex
    b_amp: complex
    z_mem: complex = 0j


INITIAL_STATE = AmplitudeState(1 + 0j, 0j, 0j)


def rhs(s: AmplitudeState, p: PhysParams) -> AmplitudeState:
    if p.memoryless:
        raise ModelError("rhs needs a finite lam; use rhs_memoryless")
    a, b, z = s
    return AmplitudeState(
        -1j * p.kappa * b,
        -1j * p.kappa * a - 0.5 * p.gamma * p.lam * z,
        b - p.lam * z,
    )


def rhs_memoryless(s: AmplitudeState, p: PhysParams) -> AmplitudeState:
    """lam -> infinity limit: the cavity decays at rate gamma/2, z is unused."""
    if not p.memoryless:
        raise ModelError("rhs_memoryless is only valid for lam = INFINITE")
    a, b, _ = s
    return AmplitudeState(-1j * p.kappa * b, -1j * p.kappa * a - 0.5 * p.gamma * b, 0j)


def rk4_step(f: Callable[[AmplitudeState], AmplitudeState], y: AmplitudeState, h: float):
    k1 = f(y)
    k2 = f(AmplitudeState(*(yi + 0.5 * h * ki for yi, ki in zip(y, k1))))
    k3 = f(AmplitudeState(*(yi + 0.5 * h * ki for yi, ki in zip(y, k2))))
    k4 = f(AmplitudeState(*(yi + h * ki for yi, ki in zip(y, k3))))
    return AmplitudeState(
        *(
            yi + h / 6 * (a + 2 * b + 2 * c + d)
            for yi, a, b, c, d in zip(y, k1, k2, k3, k4)
        )
    )


def default_dt(p: PhysParams) -> float:
    """1e-3/gamma, tightened to 1e-4/gamma for very wide reservoirs."""
    if not p.memoryless and p.lam > 100 * p.gamma:
        return 1e-4 / p.gamma
    return 1e-3 / p.gamma


def integrate_states(p: PhysParams, grid: TimeGrid) -> list[AmplitudeState]:
    """Amplitude states on every grid time, starting from A(0)=1."""
    if p.memoryless:
        f = lambda s: rhs_memoryless(s, p)  # noqa: E731
    else:
        f = lambda s: rhs(s, p)  # noqa: E731
    y = INITIAL_STATE
    out = [y]
    h = grid.dt
    for _ in range(grid.n):
        y = rk4_step(f, y, h)
        out.append(y)
    return out


def integrate(p: PhysParams, grid: TimeGrid) -> np.ndarray:
    """A(t) on the grid; for this initial condition A(t) equals G(t)."""
    return np.array([s.a_amp for s in integrate_states(p, grid)])


def reservoir_population(s: AmplitudeState) -> float:
    """Excitation weight carried by the reservoir, 1 - |A|^2 - |B|^2."""
    pop = 1.0 - abs(s.a_amp) ** 2 - abs(s.b_amp) ** 2
    if not -NORM_TOL <= pop <= 1 + NORM_TOL:
        raise NormConservationError(f"reservoir population {pop} out of range")
    return pop


def memory_integral_trapezoid(p: PhysParams, times: np.ndarray, b_values: np.ndarray) -> np.ndarray:
    """int_0^t alpha(t - s) B(s) ds by the trapezoid rule on every grid time.

    O(n^2); used only to check the auxiliary-variable rewrite.
    """
    if p.memoryless:
        raise ModelError("the memory integral needs a finite lam")
    out = np.zeros(len(times), dtype=complex)
    coef = 0.5 * p.gamma * p.lam
    for i in range(1, len(times)):
        w = coef * np.exp(-p.lam * (times[i] - times[: i + 1]))
        out[i] = _trapezoid(w * b_values[: i + 1], times[: i + 1])
    return out


def order_ratio(p: PhysParams, t_max: float = 20.0, dt: float = 0.1) -> float:
    """max|A_dt - A_dt/2| / max|A_dt/2 - A_dt/4| on common times; ~16 for RK4."""
    a1 = integrate(p, TimeGrid(t_max, dt))
    a2 = integrate(p, TimeGrid(t_max, dt / 2))
    a4 = integrate(p, TimeGrid(t_max, dt / 4))
    e1 = np.max(np.abs(a1 - a2[::2]))
    e2 = np.max(np.abs(a2[::2] - a4[::4]))
    return float(e1 / e2)


def check_order(p: PhysParams, t_max: float = 20.0, dt: float = 0.1) -> float:
    ratio = order_ratio(p, t_max, dt)
    if not 8 <= ratio <= 32:
        raise IntegratorOrderError(f"step-halving error ratio {ratio:.3g} outside [8, 32]")
    return ratio
