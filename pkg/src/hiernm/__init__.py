"""Exact dynamics and trace-distance non-Markovianity of a qubit coupled to a
single-mode cavity that leaks into a Lorentzian reservoir."""

from .measure import (
    EPS_NM,
    NMResult,
    find_extrema,
    is_markovian,
    nm_from_trace_distance,
    nm_optimal_pair,
    optimize_pairs,
)
from .model import (
    INFINITE,
    DensityMatrix2,
    PhysParams,
    TimeGrid,
    correlation_kernel,
    evolve_qubit,
    lorentzian_spectrum,
    trace_distance,
    trace_distance_model,
)
from .phase import PhaseDiagram, sweep, threshold_kappa
from .propagator import (
    PropagatorModes,
    denominator_coeffs,
    g_direct_model,
    g_memoryless,
    g_of_t,
    laplace_invert,
    propagator,
    solve_cubic,
)

__version__ = "0.1.0"
