"""Model parameters, reservoir functions and qubit states.

Units: the reservoir rate ``gamma`` (default 1) sets the unit system. Couplings
and spectral widths are rates in units of gamma, times in units of 1/gamma.
The memoryless reservoir is represented by ``lam = INFINITE`` (``math.inf``).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

INFINITE = math.inf

POSITIVITY_TOL = 1e-12
PROPAGATOR_TOL = 1e-9


class ModelError(ValueError):
    """Invalid model input."""


class UnphysicalPropagatorError(ModelError):
    pass


@dataclass(frozen=True)
class PhysParams:
    """One instance of the qubit-cavity-reservoir model.

    kappa : qubit-cavity coupling
    lam : reservoir spectral width (memory time 1/lam), or INFINITE
    gamma : reservoir decay scale
    omega0 : common resonance frequency; drops out of the reduced dynamics
    """

    kappa: float
    lam: float
    gamma: float = 1.0
    omega0: float = 0.0

    def __post_init__(self):
        for name in ("kappa", "lam", "gamma", "omega0"):
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or math.isnan(value):
                raise ModelError(f"{name} must be a real number, got {value!r}")
        if not math.isfinite(self.kappa) or self.kappa < 0:
            raise ModelError(f"kappa must be finite and >= 0, got {self.kappa}")
        if not math.isfinite(self.gamma) or self.gamma <= 0:
            raise ModelError(f"gamma must be finite and > 0, got {self.gamma}")
        if not self.lam > 0:
            raise ModelError(f"lam must be > 0 or INFINITE, got {self.lam}")
        if not math.isfinite(self.omega0):
            raise ModelError("omega0 must be finite")

    @property
    def memoryless(self) -> bool:
        return math.isinf(self.lam)


@dataclass(frozen=True)
class DensityMatrix2:
    """Qubit state stored as (rho_ee, rho_eg); rho_gg and rho_ge are implied."""

    ee: float
    eg: complex = 0j

    def __post_init__(self):
        ee, eg = float(self.ee), complex(self.eg)
        if not (math.isfinite(ee) and math.isfinite(eg.real) and math.isfinite(eg.imag)):
            raise ModelError("density matrix entries must be finite")
        if ee < -POSITIVITY_TOL or ee > 1 + POSITIVITY_TOL:
            raise ModelError(f"population rho_ee={ee} outside [0, 1]")
        if abs(eg) ** 2 > ee * (1 - ee) + POSITIVITY_TOL:
            raise ModelError(f"coherence |rho_eg|^2={abs(eg) ** 2} violates positivity")
        object.__setattr__(self, "ee", ee)
        object.__setattr__(self, "eg", eg)

    @property
    def gg(self) -> float:
        return 1.0 - self.ee

    @property
    def ge(self) -> complex:
        return self.eg.conjugate()

    def matrix(self) -> np.ndarray:
        """Full 2x2 matrix in the (|e>, |g>) basis."""
        return np.array([[self.ee, self.eg], [self.ge, self.gg]], dtype=complex)

    @classmethod
    def pure(cls, theta: float, phi: float = 0.0) -> "DensityMatrix2":
        """cos(theta/2)|e> + exp(i phi) sin(theta/2)|g>."""
        c, s = math.cos(theta / 2), math.sin(theta / 2)
        return cls(c * c, c * s * complex(math.cos(phi), -math.sin(phi)))

    @classmethod
    def excited(cls) -> "DensityMatrix2":
        return cls(1.0, 0j)

    @classmethod
    def ground(cls) -> "DensityMatrix2":
        return cls(0.0, 0j)

    @classmethod
    def plus(cls) -> "DensityMatrix2":
        return cls(0.5, 0.5 + 0j)

    @classmethod
    def minus(cls) -> "DensityMatrix2":
        return cls(0.5, -0.5 + 0j)


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid 0, dt, ..., t_max with n = t_max/dt steps."""

    t_max: float
    dt: float

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ModelError(f"dt must be positive, got {self.dt}")
        if not (self.t_max > 0 and math.isfinite(self.t_max)):
            raise ModelError(f"t_max must be positive, got {self.t_max}")
        n = round(self.t_max / self.dt)
        if n < 2:
            raise ModelError("time grid needs at least two steps")
        if abs(n * self.dt - self.t_max) > 1e-9 * self.t_max:
            raise ModelError(f"t_max={self.t_max} is not a multiple of dt={self.dt}")

    @property
    def n(self) -> int:
        return round(self.t_max / self.dt)

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n + 1) * self.dt


def _require_finite_lambda(p: PhysParams, what: str) -> None:
    if p.memoryless:
        raise ModelError(
            f"{what} is undefined for an infinite spectral width; "
            "use the memoryless closed form (g_memoryless) instead"
        )


def lorentzian_spectrum(omega, p: PhysParams):
    """J(w) = (gamma / 2 pi) lam^2 / ((w0 - w)^2 + lam^2)."""
    _require_finite_lambda(p, "the Lorentzian spectrum")
    omega = np.asarray(omega, dtype=float)
    out = p.gamma / (2 * np.pi) * p.lam**2 / ((p.omega0 - omega) ** 2 + p.lam**2)
    return float(out) if out.ndim == 0 else out


def correlation_kernel(delta_t, p: PhysParams):
    """Reservoir correlation function (gamma lam / 2) exp(-lam |dt|)."""
    _require_finite_lambda(p, "the correlation kernel")
    delta_t = np.asarray(delta_t, dtype=float)
    out = 0.5 * p.gamma * p.lam * np.exp(-p.lam * np.abs(delta_t))
    return float(out) if out.ndim == 0 else out


def evolve_qubit(rho0: DensityMatrix2, g: complex) -> DensityMatrix2:
    """Apply the amplitude-damping-type map defined by the propagator value g."""
    g = complex(g)
    if abs(g) > 1 + PROPAGATOR_TOL:
        raise UnphysicalPropagatorError(f"|G|={abs(g)} exceeds 1")
    if abs(g) > 1:
        g /= abs(g)
    return DensityMatrix2(rho0.ee * abs(g) ** 2, rho0.eg * g)


def trace_distance(rho1: DensityMatrix2, rho2: DensityMatrix2) -> float:
    """Half the trace norm of rho1 - rho2, from the eigenvalues of the difference."""
    mu = np.linalg.eigvalsh(rho1.matrix() - rho2.matrix())
    return 0.5 * float(np.sum(np.abs(mu)))


def trace_distance_model(g: complex, delta_a: float, delta_b: complex) -> float:
    """Trace distance between two states evolved with the same propagator value.

    delta_a and delta_b are the initial differences of rho_ee and rho_eg.
    """
    ag = abs(complex(g))
    return ag * math.sqrt(ag * ag * delta_a * delta_a + abs(complex(delta_b)) ** 2)
