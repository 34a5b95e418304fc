"""Exact propagator G(t) by partial-fraction inversion of its Laplace transform.

The transform of the excited-state amplitude is a ratio of polynomials whose
denominator is cubic (finite reservoir width) or quadratic (memoryless
reservoir, and the direct qubit-reservoir comparison model). Its poles are
found in closed form and G(t) is represented as a short sum of exponentials.
"""
from __future__ import annotations

import cmath
import enum
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .model import ModelError, PhysParams

MULTIPLICITY_TOL = 1e-8
RESIDUAL_TOL = 1e-10
IMAG_TOL = 1e-9
BOUND_TOL = 1e-9


class PropagatorError(ArithmeticError):
    """Internal consistency failure of a propagator representation."""


class DegeneracyError(PropagatorError):
    """Triple pole; the parameter point lies on an unsupported degenerate set."""


class Multiplicity(enum.Enum):
    DISTINCT = "distinct"
    DOUBLE = "double"
    TRIPLE = "triple"


@dataclass(frozen=True)
class CubicRoots:
    roots: tuple[complex, complex, complex]
    multiplicity: Multiplicity
    tol: float = MULTIPLICITY_TOL


class Mode(NamedTuple):
    """One term residue * t**order * exp(exponent * t)."""

    exponent: complex
    residue: complex
    order: int = 0


@dataclass(frozen=True)
class PropagatorModes:
    terms: tuple[Mode, ...]

    def __post_init__(self):
        terms = tuple(Mode(complex(p), complex(r), int(k)) for p, r, k in self.terms)
        object.__setattr__(self, "terms", terms)

    @property
    def static(self) -> bool:
        """True when G(t) is identically 1."""
        return all(m.exponent == 0 or m.residue == 0 for m in self.terms)

    @property
    def fastest_rate(self) -> float:
        rates = [abs(m.exponent) for m in self.terms if m.residue != 0]
        return max(rates, default=0.0)

    def check(self) -> "PropagatorModes":
        """Raise PropagatorError unless G(0)=1 and all exponents are stable."""
        zeroth = [m.residue for m in self.terms if m.order == 0]
        scale = max(1.0, sum(abs(r) for r in zeroth))
        if abs(sum(zeroth) - 1) > RESIDUAL_TOL * scale:
            raise PropagatorError(f"residues sum to {sum(zeroth)}, expected 1")
        for m in self.terms:
            if m.exponent.real > RESIDUAL_TOL:
                raise PropagatorError(f"unstable exponent {m.exponent}")
        return self

    def _evaluate(self, t, derivative: bool = False) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape, dtype=complex)
        for p, r, k in self.terms:
            e = np.exp(p * t)
            if k == 0:
                out += r * p * e if derivative else r * e
            elif derivative:
                out += r * (1 + p * t) * e
            else:
                out += r * t * e
        return out

    def _evaluate_scalar(self, t: float) -> complex:
        out = 0j
        for p, r, k in self.terms:
            e = cmath.exp(p * t)
            out += r * e if k == 0 else r * t * e
        return out

    def __call__(self, t):
        return g_of_t(self, t)

    def derivative(self, t):
        """dG/dt (real part)."""
        out = self._evaluate(t, derivative=True).real
        return float(out) if out.ndim == 0 else out

    def envelope(self, t):
        """Upper bound sum |r| t^k exp(Re(p) t) on |G(t)|."""
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape)
        for p, r, k in self.terms:
            out += abs(r) * t**k * np.exp(p.real * t)
        return float(out) if out.ndim == 0 else out


def _newton_polish(coeffs, x, steps=3):
    """Newton steps on a monic polynomial; a step is kept only if it helps."""
    poly = np.polynomial.Polynomial(coeffs[::-1])
    dpoly = poly.deriv()
    fx = abs(poly(x))
    for _ in range(steps):
        d = dpoly(x)
        if d == 0:
            break
        x_new = x - poly(x) / d
        f_new = abs(poly(x_new))
        if f_new >= fx:
            break
        x, fx = x_new, f_new
    return x


def _classify(roots, tol):
    scale = max(max(abs(r) for r in roots), 1e-300)
    close = [
        (i, j)
        for i in range(3)
        for j in range(i + 1, 3)
        if abs(roots[i] - roots[j]) <= tol * scale
    ]
    if len(close) >= 2:
        return Multiplicity.TRIPLE
    if len(close) == 1:
        return Multiplicity.DOUBLE
    return Multiplicity.DISTINCT


def solve_cubic(coeffs: Sequence[float], tol: float = MULTIPLICITY_TOL) -> CubicRoots:
    """Roots of c3 p^3 + c2 p^2 + c1 p + c0 with real coefficients.

    Cardano (one real root) or the trigonometric form (three real roots),
    followed by Newton polishing. A complex pair is returned exactly
    conjugate. Roots closer than ``tol`` (relative) are merged.
    """
    c = [float(x) for x in coeffs]
    if len(c) != 4:
        raise ValueError("a cubic needs four coefficients")
    if not all(math.isfinite(x) for x in c):
        raise ValueError(f"non-finite cubic coefficients {c}")
    if c[0] == 0:
        raise ValueError("leading cubic coefficient is zero")
    b, cc, d = c[1] / c[0], c[2] / c[0], c[3] / c[0]
    monic = [1.0, b, cc, d]

    # depressed cubic y^3 + P y + Q with p = y - b/3
    shift = b / 3
    P = cc - b * b / 3
    Q = 2 * b**3 / 27 - b * cc / 3 + d
    disc = (Q / 2) ** 2 + (P / 3) ** 3

    if disc > 0:
        sq = math.sqrt(disc)
        u = np.cbrt(-Q / 2 - math.copysign(sq, Q))
        v = -P / (3 * u) if u != 0 else 0.0
        real = float(_newton_polish(monic, u + v - shift))
        pair = _newton_polish(monic, complex(-(u + v) / 2 - shift, math.sqrt(3) / 2 * abs(u - v)))
        roots = [complex(real), pair, pair.conjugate()]
    elif P == 0:
        roots = [complex(-shift)] * 3
    else:
        m = 2 * math.sqrt(-P / 3)
        arg = 3 * Q / (P * m)
        theta = math.acos(max(-1.0, min(1.0, arg))) / 3
        roots = [
            complex(_newton_polish(monic, m * math.cos(theta - 2 * math.pi * k / 3) - shift).real)
            for k in range(3)
        ]

    multiplicity = _classify(roots, tol)
    if multiplicity is Multiplicity.DOUBLE:
        for i in range(3):
            for j in range(i + 1, 3):
                scale = max(abs(r) for r in roots)
                if abs(roots[i] - roots[j]) <= tol * scale:
                    merged = complex(((roots[i] + roots[j]) / 2).real)
                    other = next(roots[k] for k in range(3) if k not in (i, j))
                    roots = [complex(other.real), merged, merged]
                    break
            else:
                continue
            break
    elif multiplicity is Multiplicity.TRIPLE:
        mean = complex((sum(roots) / 3).real)
        roots = [mean] * 3
    return CubicRoots(tuple(roots), multiplicity, tol)


def _solve_quadratic(b: float, c: float, tol: float = MULTIPLICITY_TOL):
    """Roots of p^2 + b p + c; returns (roots, double?)."""
    disc = b * b - 4 * c
    scale = max(b * b, abs(c), 1e-300)
    if abs(disc) <= tol * tol * scale:
        return [complex(-b / 2)] * 2, True
    if disc > 0:
        q = -0.5 * (b + math.copysign(math.sqrt(disc), b))
        r1 = q
        r2 = c / q if q != 0 else -b - q
        return [complex(r1), complex(r2)], False
    w = math.sqrt(-disc) / 2
    z = complex(-b / 2, w)
    return [z, z.conjugate()], False


def _poly(coeffs, x):
    out = 0j
    for a in coeffs:
        out = out * x + a
    return out


def _dpoly(coeffs, x):
    n = len(coeffs) - 1
    return _poly([a * (n - i) for i, a in enumerate(coeffs[:-1])], x)


def _partial_fractions(num, roots, double: bool) -> PropagatorModes:
    """Inverse Laplace transform of num(p) / prod(p - roots).

    With ``double`` the last two roots coincide (confluent pole).
    """
    terms = []
    if not double:
        for i, pi in enumerate(roots):
            den = 1 + 0j
            for j, pj in enumerate(roots):
                if j != i:
                    den *= pi - pj
            terms.append(Mode(pi, _poly(num, pi) / den))
        # conjugate symmetry of the pair is exact when the roots are
        for i in range(len(terms)):
            for j in range(i + 1, len(terms)):
                if terms[i].exponent == terms[j].exponent.conjugate() and terms[i].exponent.imag:
                    terms[j] = Mode(terms[j].exponent, terms[i].residue.conjugate())
        return PropagatorModes(tuple(terms))

    d = roots[-1]
    if len(roots) == 2:
        return PropagatorModes((Mode(d, _dpoly(num, d)), Mode(d, _poly(num, d), 1)))
    s = roots[0]
    nd, dnd, ns = _poly(num, d), _dpoly(num, d), _poly(num, s)
    return PropagatorModes(
        (
            Mode(s, ns / (s - d) ** 2),
            Mode(d, (dnd * (d - s) - nd) / (d - s) ** 2),
            Mode(d, nd / (d - s), 1),
        )
    )


def _real_modes(modes: PropagatorModes) -> PropagatorModes:
    """Drop spurious imaginary parts on real exponents/residues."""
    terms = []
    for p, r, k in modes.terms:
        if p.imag == 0:
            r = complex(r.real)
        terms.append(Mode(p, r, k))
    return PropagatorModes(tuple(terms))


UNIT_MODES = PropagatorModes((Mode(0j, 1 + 0j),))


def denominator_coeffs(p: PhysParams) -> list[float]:
    """Cubic denominator p^3 + lam p^2 + (kappa^2 + gamma lam / 2) p + kappa^2 lam."""
    if p.memoryless:
        raise ModelError("the cubic denominator needs a finite lam; use g_memoryless")
    k2 = p.kappa**2
    return [1.0, p.lam, k2 + p.gamma * p.lam / 2, k2 * p.lam]


def laplace_invert(p: PhysParams) -> PropagatorModes:
    """Exponential-sum representation of G(t) for a finite reservoir width."""
    coeffs = denominator_coeffs(p)
    if p.kappa == 0:
        return UNIT_MODES
    cr = solve_cubic(coeffs)
    if cr.multiplicity is Multiplicity.TRIPLE:
        raise DegeneracyError(
            f"triple pole at kappa={p.kappa!r}, lam={p.lam!r}, gamma={p.gamma!r}; "
            "perturb lam by ~1e-9 relative"
        )
    num = [1.0, p.lam, p.gamma * p.lam / 2]
    modes = _partial_fractions(num, cr.roots, cr.multiplicity is Multiplicity.DOUBLE)
    return _real_modes(modes).check()


def _quadratic_modes(num, b, c) -> PropagatorModes:
    roots, double = _solve_quadratic(b, c)
    return _real_modes(_partial_fractions(num, roots, double)).check()


def memoryless_modes(kappa: float, gamma: float = 1.0) -> PropagatorModes:
    """Modes of (p + gamma/2) / (p^2 + gamma p / 2 + kappa^2)."""
    if kappa == 0:
        return UNIT_MODES
    return _quadratic_modes([1.0, gamma / 2], gamma / 2, kappa**2)


def direct_modes(kappa: float, lam: float) -> PropagatorModes:
    """Modes of the qubit coupled straight to a reservoir with kernel kappa^2 exp(-lam|t|)."""
    if kappa == 0:
        return UNIT_MODES
    return _quadratic_modes([1.0, lam], lam, kappa**2)


def propagator(p: PhysParams) -> PropagatorModes:
    """Modes for any parameter point, routing INFINITE lam to the memoryless form."""
    if p.memoryless:
        return memoryless_modes(p.kappa, p.gamma)
    return laplace_invert(p)


def g_of_t(modes: PropagatorModes, t):
    """Evaluate G(t) = Re sum r t^k exp(p t); checks reality and |G| <= 1."""
    if isinstance(t, (float, int)):
        if t < 0:
            raise ValueError("G(t) is defined for t >= 0")
        z = modes._evaluate_scalar(float(t))
        if abs(z.imag) >= IMAG_TOL or abs(z.real) > 1 + BOUND_TOL:
            raise PropagatorError(f"G({t})={z} violates |Im G| < {IMAG_TOL} or |G| <= 1")
        return z.real
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise ValueError("G(t) is defined for t >= 0")
    z = modes._evaluate(t_arr)
    if np.any(np.abs(z.imag) >= IMAG_TOL):
        raise PropagatorError(f"|Im G| reached {np.max(np.abs(z.imag)):.3g}")
    if np.any(np.abs(z.real) > 1 + BOUND_TOL):
        raise PropagatorError(f"|G| reached {np.max(np.abs(z.real)):.17g}")
    out = z.real
    return float(out) if out.ndim == 0 else out


def _damped_closed_form(rate: float, disc: float, t, scale: float):
    """exp(-rate t/2) [cosh(s t/2) + (rate/s) sinh(s t/2)], s = sqrt(disc).

    Shared by the memoryless and direct models; ``scale`` sets the relative
    tolerance for the critical branch.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("G(t) is defined for t >= 0")
    if abs(disc) <= 1e-10 * scale:
        out = np.exp(-rate * t / 2) * (1 + rate * t / 2)
    elif disc > 0:
        s = math.sqrt(disc)
        # split into two decaying exponentials to avoid cosh overflow
        out = 0.5 * ((1 + rate / s) * np.exp((s - rate) * t / 2)
                     + (1 - rate / s) * np.exp(-(s + rate) * t / 2))
    else:
        w = math.sqrt(-disc)
        out = np.exp(-rate * t / 2) * (np.cos(w * t / 2) + rate / w * np.sin(w * t / 2))
    return float(out) if out.ndim == 0 else out


def g_memoryless(kappa: float, gamma: float, t):
    """Closed form G(t) for a memoryless reservoir.

    G(t) = exp(-gamma t/4) [(gamma/a) sinh(a t/4) + cosh(a t/4)] with
    a = sqrt(gamma^2 - 16 kappa^2); trigonometric for kappa > gamma/4 and
    exp(-gamma t/4)(1 + gamma t/4) at kappa = gamma/4.
    """
    if kappa < 0:
        raise ValueError("kappa must be >= 0")
    # rescaled to the generic damped oscillator with rate gamma/2
    return _damped_closed_form(gamma / 2, (gamma**2 - 16 * kappa**2) / 4, t, gamma**2 / 4)


def g_direct_model(kappa: float, lam: float, t):
    """G(t) for the comparison model without a cavity.

    Solves G'' + lam G' + kappa^2 G = 0 with G(0)=1, G'(0)=0.
    """
    if kappa < 0 or lam <= 0:
        raise ValueError("need kappa >= 0 and lam > 0")
    return _damped_closed_form(lam, lam**2 - 4 * kappa**2, t, lam**2)


def _revival_sum(omega: float, q: float, zero_phase: float, horizon: float, g_abs) -> float:
    """Sum of |G| rises when |G| peaks at omega t = n pi with height q**n.

    Each rise starts at a zero of G (omega t = zero_phase + (n-1) pi). A rise
    still in progress at ``horizon`` contributes |G(horizon)|.
    """
    if math.isinf(horizon):
        return q / (1 - q)
    n_max = math.floor(horizon * omega / math.pi)
    total = q * (1 - q**n_max) / (1 - q)
    if horizon * omega > zero_phase + n_max * math.pi:
        total += g_abs(horizon)
    return total


def nm_memoryless_closed_form(kappa: float, gamma: float = 1.0, horizon: float = math.inf) -> float:
    """Sum of |G| revivals for the memoryless reservoir up to ``horizon``.

    Maxima of |G| sit at |a| t/4 = n pi with height exp(-n pi gamma/|a|) and
    each revival starts from a zero of G.
    """
    if 16 * kappa**2 <= gamma**2:
        return 0.0
    w = math.sqrt(16 * kappa**2 - gamma**2)
    q = math.exp(-math.pi * gamma / w)
    return _revival_sum(
        w / 4, q, math.pi - math.atan(w / gamma), horizon, lambda t: abs(g_memoryless(kappa, gamma, t))
    )


def nm_direct_closed_form(kappa: float, lam: float, horizon: float = math.inf) -> float:
    """Sum of |G| revivals for the direct model: sum_n exp(-n pi lam / (2 w))."""
    if lam >= 2 * kappa:
        return 0.0
    w = math.sqrt(kappa**2 - lam**2 / 4)
    q = math.exp(-math.pi * lam / (2 * w))
    return _revival_sum(
        w, q, math.pi - math.atan(2 * w / lam), horizon, lambda t: abs(g_direct_model(kappa, lam, t))
    )
