"""Trace-distance non-Markovianity.

The measure is the total increase of the trace distance between two evolved
states. Rather than integrating the rate of change, the trace distance is
sampled, its local extrema are located and refined, and the gains over the
rising stretches are summed. For this model every pair evolves through the
same propagator G(t), so the trace distance is a function of |G| alone.
"""
from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional

import numpy as np

from .model import DensityMatrix2, PhysParams
from .propagator import PropagatorModes, propagator

EPS_NM = 1e-8
SLOPE_TOL = 1e-12
TIME_TOL = 1e-6
HORIZON_CUTOFF = 1e-6
HORIZON_CAP = 200.0
RESOLUTION = 1e-2
HORIZON_WARN = 1e-2

INV_PHI = (math.sqrt(5) - 1) / 2


class HorizonWarning(UserWarning):
    pass


class Kind(enum.Enum):
    MIN = "min"
    MAX = "max"
    ENDPOINT = "endpoint"


class Extremum(NamedTuple):
    time: float
    value: float
    kind: Kind


@dataclass(frozen=True)
class ExtremaList:
    events: tuple[Extremum, ...]

    @property
    def interior(self) -> tuple[Extremum, ...]:
        return tuple(e for e in self.events if e.kind is not Kind.ENDPOINT)


class Rise(NamedTuple):
    t_start: float
    t_end: float
    gain: float


@dataclass(frozen=True)
class NMResult:
    nm_value: float
    rises: tuple[Rise, ...]
    horizon: float
    truncation_bound: float
    markovian: bool
    warnings: tuple[str, ...] = field(default=())


def golden_section(f: Callable[[float], float], a: float, b: float, tol: float = 1e-9) -> float:
    """Abscissa of the minimum of a unimodal f on [a, b]."""
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def bisect_root(f: Callable[[float], float], a: float, b: float, tol: float = 1e-12) -> float:
    fa = f(a)
    for _ in range(200):
        if b - a <= tol:
            break
        m = 0.5 * (a + b)
        fm = f(m)
        if fm == 0:
            return m
        if (fm > 0) == (fa > 0):
            a, fa = m, fm
        else:
            b = m
    return 0.5 * (a + b)


def find_extrema(
    times,
    values,
    refiner: Callable[[float], float],
    crossing: Optional[Callable[[float], float]] = None,
    time_tol: float = TIME_TOL,
    slope_tol: float = SLOPE_TOL,
) -> ExtremaList:
    """Locate and refine the local extrema of a sampled non-negative series.

    Sign changes of the finite-difference slope bracket each extremum, which
    is then refined on ``refiner``. If ``crossing`` (a signed function whose
    absolute value the series follows) changes sign inside a minimum's
    bracket, the minimum is a kink: its time is found by bisection on
    ``crossing`` and its value is exactly zero. Stretches with
    |slope| <= slope_tol count as flat.
    """
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    if t.shape != v.shape or t.ndim != 1 or len(t) < 2:
        raise ValueError("times and values must be 1-d arrays of equal length >= 2")
    if not (np.all(np.isfinite(t)) and np.all(np.isfinite(v))):
        raise ValueError("non-finite samples")
    if np.any(np.diff(t) <= 0):
        raise ValueError("times must be strictly increasing")
    tol = min(time_tol, 1e-9)

    slope = np.diff(v) / np.diff(t)
    sgn = np.where(slope > slope_tol, 1, np.where(slope < -slope_tol, -1, 0))
    nz = np.flatnonzero(sgn)
    events = [Extremum(float(t[0]), float(v[0]), Kind.ENDPOINT)]
    if len(nz) > 1:
        s = sgn[nz]
        for c in np.flatnonzero(s[1:] != s[:-1]):
            lo, hi = float(t[nz[c]]), float(t[nz[c + 1] + 1])
            window = v[nz[c] : nz[c + 1] + 2]
            if s[c] < 0:
                if crossing is not None and crossing(lo) * crossing(hi) < 0:
                    tm, vm = bisect_root(crossing, lo, hi), 0.0
                else:
                    tm = golden_section(refiner, lo, hi, tol)
                    vm = min(refiner(tm), float(window.min()))
                ev = Extremum(tm, vm, Kind.MIN)
            else:
                tm = golden_section(lambda x: -refiner(x), lo, hi, tol)
                ev = Extremum(tm, max(refiner(tm), float(window.max())), Kind.MAX)
            prev = events[-1]
            if ev.time <= prev.time or (prev.kind is ev.kind):
                continue
            events.append(ev)
    last = Extremum(float(t[-1]), float(v[-1]), Kind.ENDPOINT)
    if last.time <= events[-1].time:
        events.pop()
    events.append(last)
    return ExtremaList(tuple(events))


def nm_from_trace_distance(extrema: ExtremaList) -> NMResult:
    """Sum the gains of the trace distance over its rising stretches."""
    rises = []
    ev = extrema.events
    for e0, e1 in zip(ev, ev[1:]):
        if e0.kind is Kind.MAX or e1.kind is Kind.MIN:
            continue
        gain = e1.value - e0.value
        if gain > 0:
            rises.append(Rise(e0.time, e1.time, gain))
    nm = math.fsum(r.gain for r in rises)
    return NMResult(
        nm_value=nm,
        rises=tuple(rises),
        horizon=ev[-1].time,
        truncation_bound=ev[-1].value,
        markovian=nm < EPS_NM,
    )


def choose_horizon(modes: PropagatorModes, cutoff: float = HORIZON_CUTOFF, cap: float = HORIZON_CAP) -> float:
    """Time after which the |G| envelope stays below ``cutoff``, at most ``cap``."""
    if modes.static:
        return cap
    t = np.arange(0.0, cap + RESOLUTION / 2, RESOLUTION)
    above = np.flatnonzero(modes.envelope(t) >= cutoff)
    if len(above) == 0:
        return float(t[1])
    i = above[-1] + 1
    return float(t[i]) if i < len(t) else cap


def sample_times(modes: PropagatorModes, horizon: float, resolution: float = RESOLUTION) -> np.ndarray:
    """Uniform grid at ``resolution``, refined near t=0 when a pole is fast."""
    fast = modes.fastest_rate
    n = max(2, int(math.ceil(horizon / resolution)))
    coarse = np.linspace(0.0, horizon, n + 1)
    if fast * resolution <= 0.1:
        return coarse
    t_fast = min(horizon, 20.0 / fast)
    fine = np.linspace(0.0, t_fast, int(math.ceil(t_fast * fast / 0.05)) + 1)
    return np.union1d(fine, coarse)


def _pair_distance(modes: PropagatorModes, delta_a: float, abs_db: float):
    def dist(t):
        if isinstance(t, float):
            g = abs(modes(t))
            return g * math.sqrt(g * g * delta_a * delta_a + abs_db * abs_db)
        g = np.abs(modes(t))
        return g * np.sqrt(g * g * delta_a * delta_a + abs_db * abs_db)

    return dist


def nm_of_modes(
    modes: PropagatorModes,
    horizon: Optional[float] = None,
    resolution: float = RESOLUTION,
    delta_a: float = 0.0,
    delta_b: complex = 1.0,
) -> NMResult:
    """NM of one initial pair, given by its rho_ee and rho_eg differences."""
    if horizon is None:
        horizon = choose_horizon(modes)
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    t = sample_times(modes, horizon, resolution)
    dist = _pair_distance(modes, delta_a, abs(complex(delta_b)))
    res = nm_from_trace_distance(find_extrema(t, dist(t), dist, crossing=modes))
    bound = 0.0 if modes.static else float(modes.envelope(horizon))
    notes = ()
    if bound > HORIZON_WARN:
        notes = (f"horizon {horizon:g} too short: |G| may still reach {bound:.3g}",)
        warnings.warn(notes[0], HorizonWarning, stacklevel=2)
    return NMResult(res.nm_value, res.rises, horizon, bound, res.markovian, notes)


def nm_optimal_pair(p: PhysParams, horizon: Optional[float] = None, resolution: float = RESOLUTION) -> NMResult:
    """NM for the pair |+><+|, |-><-|, whose trace distance is |G(t)|."""
    return nm_of_modes(propagator(p), horizon, resolution)


def _pair_deltas(r1: DensityMatrix2, r2: DensityMatrix2):
    return r1.ee - r2.ee, r1.eg - r2.eg


def bloch_grid(resolution: int) -> list[DensityMatrix2]:
    thetas = np.linspace(0.0, np.pi, resolution)
    phis = np.linspace(0.0, 2 * np.pi, resolution, endpoint=False)
    states = []
    for th in thetas:
        # the poles need a single azimuth
        for ph in phis[:1] if th in (0.0, np.pi) else phis:
            states.append(DensityMatrix2.pure(th, ph))
    return states


def optimize_pairs(p: PhysParams, bloch_resolution: int = 8, horizon: Optional[float] = None):
    """Maximise NM over pairs of pure states on a Bloch-sphere grid.

    The equatorial antipodal pair |+>, |-> is always included as a candidate.
    Pairs with equal (|d rho_ee|, |d rho_eg|) share a trace-distance curve and
    are evaluated once. Returns ((rho1, rho2), NMResult).
    """
    if bloch_resolution < 8:
        raise ValueError("bloch_resolution must be >= 8")
    modes = propagator(p)
    if horizon is None:
        horizon = choose_horizon(modes)
    states = bloch_grid(bloch_resolution)
    candidates = {}
    pairs = [(DensityMatrix2.plus(), DensityMatrix2.minus())]
    pairs += [(states[i], states[j]) for i in range(len(states)) for j in range(i + 1, len(states))]
    for r1, r2 in pairs:
        da, db = _pair_deltas(r1, r2)
        key = (round(abs(da), 12), round(abs(db), 12))
        candidates.setdefault(key, (r1, r2))
    best = None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", HorizonWarning)
        for (da, adb), pair in candidates.items():
            res = nm_of_modes(modes, horizon, delta_a=da, delta_b=adb)
            if best is None or res.nm_value > best[1].nm_value:
                best = (pair, res)
    return best


def nm_of_pair(p: PhysParams, rho1: DensityMatrix2, rho2: DensityMatrix2, horizon: Optional[float] = None) -> NMResult:
    da, db = _pair_deltas(rho1, rho2)
    return nm_of_modes(propagator(p), horizon, delta_a=da, delta_b=db)


def _dominant_cutoff(modes: PropagatorModes, sigma: float, dominant, others) -> float:
    """Time beyond which the dominant real group fixes the signs of G and G'."""
    gap = min((sigma - m.exponent.real for m in others), default=math.inf)
    if math.isinf(gap):
        return 10.0 / max(abs(sigma), 1e-3)

    def group(t, deriv):
        out = 0.0
        for p, r, k in dominant:
            pr, rr = p.real, r.real
            out += rr * ((pr * t**k + k * t ** max(k - 1, 0)) if deriv else t**k)
        return abs(out)

    def bound(t, deriv):
        out = 0.0
        for p, r, k in others:
            w = abs(p) * t**k + k * t ** max(k - 1, 0) if deriv else t**k
            out += abs(r) * w * math.exp(-(sigma - p.real) * t)
        return out

    T = max(1.0, 2.0 / gap)
    while T < 1e6:
        if all(bound(T, d) < 0.5 * group(T, d) for d in (False, True)):
            return T
        T *= 2
    return T


def modes_are_markovian(modes: PropagatorModes, horizon: Optional[float] = None, slope_tol: float = SLOPE_TOL) -> bool:
    """Is |G| non-increasing on [0, horizon] (all t >= 0 when horizon is None)?

    With a horizon, d|G|/dt = sign(G) G' is checked on samples against an
    absolute slope tolerance. Without one the decision is structural: a
    complex pole pair that decays slowest makes G change sign forever;
    otherwise the slowest real pole fixes the signs of G and G' after a
    computable time, and the stretch before it is scanned with G rescaled
    by the dominant exponential so that late, tiny revivals are still seen.
    """
    if modes.static:
        return True
    if horizon is not None:
        t = sample_times(modes, horizon)[1:]
        g, dg = modes(t), modes.derivative(t)
        return not np.any(np.sign(g) * dg > slope_tol)

    live = [m for m in modes.terms if m.residue != 0]
    sigma = max(m.exponent.real for m in live)
    tie = 1e-12 * max(1.0, abs(sigma))
    dominant = [m for m in live if m.exponent.real >= sigma - tie]
    others = [m for m in live if m.exponent.real < sigma - tie]
    if any(m.exponent.imag != 0 for m in dominant):
        return False
    t_end = _dominant_cutoff(modes, sigma, dominant, others)
    t = sample_times(modes, t_end)[1:]
    g = np.zeros(t.shape, dtype=complex)
    dg = np.zeros(t.shape, dtype=complex)
    env = np.zeros(t.shape)
    denv = np.zeros(t.shape)
    for p, r, k in live:
        e = np.exp((p - sigma) * t)
        g += r * t**k * e
        dg += r * (p * t**k + k * t ** max(k - 1, 0)) * e
        env += abs(r) * t**k * np.abs(e)
        denv += abs(r) * (abs(p) * t**k + k * t ** max(k - 1, 0)) * np.abs(e)
    g, dg = g.real, dg.real
    rising = (np.sign(g) * dg > 1e-10 * denv) & (np.abs(g) > 1e-12 * env)
    return not np.any(rising)


def is_markovian(p: PhysParams, horizon: Optional[float] = None) -> bool:
    """Markovian iff |G(t)| never increases (equivalently NM = 0)."""
    return modes_are_markovian(propagator(p), horizon)
