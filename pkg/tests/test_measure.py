import math
import warnings

import numpy as np
import pytest

from hiernm.measure import (
    EPS_NM,
    ExtremaList,
    Extremum,
    HorizonWarning,
    Kind,
    bisect_root,
    bloch_grid,
    choose_horizon,
    find_extrema,
    golden_section,
    is_markovian,
    modes_are_markovian,
    nm_from_trace_distance,
    nm_of_modes,
    nm_of_pair,
    nm_optimal_pair,
    optimize_pairs,
)
from hiernm.model import INFINITE, DensityMatrix2, PhysParams
from hiernm.propagator import (
    direct_modes,
    laplace_invert,
    nm_direct_closed_form,
    nm_memoryless_closed_form,
    propagator,
)


def kinds(ex):
    return [e.kind for e in ex.interior]


class TestHelpers:
    def test_golden_section(self):
        assert golden_section(lambda x: (x - 0.3) ** 2, 0, 1) == pytest.approx(0.3, abs=1e-8)

    def test_bisect(self):
        assert bisect_root(math.cos, 0, 3) == pytest.approx(math.pi / 2, abs=1e-11)


class TestFindExtrema:
    def test_monotone(self):
        t = np.linspace(0, 5, 100)
        ex = find_extrema(t, np.exp(-t), lambda x: math.exp(-x))
        assert ex.interior == ()
        assert [e.kind for e in ex.events] == [Kind.ENDPOINT, Kind.ENDPOINT]

    def test_abs_cos(self):
        t = np.linspace(0, 2 * np.pi, 629)
        ex = find_extrema(t, np.abs(np.cos(t)), lambda x: abs(math.cos(x)), crossing=math.cos)
        assert kinds(ex) == [Kind.MIN, Kind.MAX, Kind.MIN]
        times = [e.time for e in ex.interior]
        np.testing.assert_allclose(times, [np.pi / 2, np.pi, 3 * np.pi / 2], atol=1e-8)
        assert ex.interior[0].value == 0

    def test_kink_at_zero_of_g(self):
        m = laplace_invert(PhysParams(0.3, 5.0))
        t = np.linspace(0, 60, 6001)
        ex = find_extrema(t, np.abs(m(t)), lambda x: abs(m(x)), crossing=m)
        mins = [e for e in ex.interior if e.kind is Kind.MIN]
        assert mins and mins[0].value == 0
        assert abs(m(mins[0].time)) < 1e-10

    def test_flat_is_not_an_extremum(self):
        t = np.linspace(0, 1, 11)
        ex = find_extrema(t, np.full(11, 0.5) + 1e-14 * np.sin(40 * t), lambda x: 0.5)
        assert ex.interior == ()

    @pytest.mark.parametrize(
        "t,v",
        [([0, 1, 2], [0, math.nan, 1]), ([0, 1], [0, math.inf]), ([0, 0, 1], [1, 2, 3]), ([0], [1])],
    )
    def test_bad_input(self, t, v):
        with pytest.raises(ValueError):
            find_extrema(t, v, lambda x: 0.0)


class TestNMFromTraceDistance:
    def ex(self, *pts):
        kinds = [Kind.ENDPOINT] + [k for _, _, k in pts[1:-1]] + [Kind.ENDPOINT]
        return ExtremaList(tuple(Extremum(t, v, k) for (t, v, _), k in zip(pts, kinds)))

    def test_monotone(self):
        res = nm_from_trace_distance(self.ex((0, 1, None), (5, 0.1, None)))
        assert res.nm_value == 0 and res.markovian and res.rises == ()

    def test_single_dip(self):
        res = nm_from_trace_distance(self.ex((0, 0.5, None), (1, 0.2, Kind.MIN), (2, 0.3, None)))
        assert res.nm_value == pytest.approx(0.1)
        assert not res.markovian
        assert res.rises[0][:2] == (1, 2)

    def test_dip_and_peak(self):
        res = nm_from_trace_distance(
            self.ex((0, 1, None), (1, 0, Kind.MIN), (2, 0.4, Kind.MAX), (3, 0.1, Kind.MIN), (4, 0.15, None))
        )
        assert res.nm_value == pytest.approx(0.45)
        assert len(res.rises) == 2


class TestNMOptimalPair:
    def test_uncoupled(self):
        res = nm_optimal_pair(PhysParams(0.0, 0.7))
        assert res.nm_value == 0 and res.markovian and res.truncation_bound == 0

    def test_memoryless_below_threshold(self):
        assert nm_optimal_pair(PhysParams(0.2, INFINITE)).nm_value == 0

    def test_revival_slice(self):
        nm = [nm_optimal_pair(PhysParams(0.3, lam)).nm_value for lam in (0.5, 1.0, 5.0)]
        assert nm[0] > 1e-3 and nm[1] < EPS_NM and nm[2] > 1e-3

    @pytest.mark.parametrize("kappa", [0.3, 0.5, 1.0])
    def test_memoryless_closed_form(self, kappa):
        res = nm_optimal_pair(PhysParams(kappa, INFINITE))
        assert res.nm_value == pytest.approx(nm_memoryless_closed_form(kappa, 1.0, res.horizon), abs=1e-9)

    @pytest.mark.parametrize("kappa,lam", [(0.3, 0.2), (0.4, 0.5), (0.5, 0.1)])
    def test_direct_closed_form(self, kappa, lam):
        res = nm_of_modes(direct_modes(kappa, lam))
        assert res.nm_value == pytest.approx(nm_direct_closed_form(kappa, lam, res.horizon), abs=1e-9)

    def test_short_horizon_warns(self):
        with pytest.warns(HorizonWarning):
            res = nm_optimal_pair(PhysParams(0.3, 0.5), horizon=5.0)
        assert res.truncation_bound > 0.01 and res.warnings

    def test_refinement_converged(self):
        p = PhysParams(0.35, 3.0)
        a = nm_optimal_pair(p, resolution=1e-2).nm_value
        b = nm_optimal_pair(p, resolution=5e-3).nm_value
        assert abs(a - b) < 1e-9

    def test_bad_horizon(self):
        with pytest.raises(ValueError):
            nm_optimal_pair(PhysParams(0.3, 0.5), horizon=0.0)


class TestHorizon:
    def test_envelope_below_cutoff(self):
        m = propagator(PhysParams(0.6, 2.0))
        h = choose_horizon(m)
        assert h < 200 and m.envelope(h) < 1e-6

    def test_capped(self):
        assert choose_horizon(propagator(PhysParams(1.0, 0.05))) == 200


class TestPairs:
    def test_grid_size(self):
        assert len(bloch_grid(8)) == 2 + 6 * 8

    def test_identical_pair(self):
        r = DensityMatrix2.pure(1.0, 2.0)
        assert nm_of_pair(PhysParams(0.3, 5.0), r, r).nm_value == 0

    def test_optimizer_prefers_equatorial_pair(self):
        p = PhysParams(0.3, 5.0)
        (r1, r2), res = optimize_pairs(p)
        assert r1.ee == pytest.approx(r2.ee)
        assert abs(r1.eg - r2.eg) == pytest.approx(1.0)
        assert res.nm_value == pytest.approx(nm_optimal_pair(p).nm_value, abs=1e-6)

    def test_optimizer_bounds_every_candidate(self):
        p = PhysParams(0.6, 0.8)
        _, best = optimize_pairs(p, bloch_resolution=8)
        states = bloch_grid(8)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", HorizonWarning)
            for r1, r2 in [(states[0], states[-1]), (states[3], states[17]), (states[9], states[40])]:
                assert nm_of_pair(p, r1, r2, best.horizon).nm_value <= best.nm_value + 1e-12

    def test_resolution_guard(self):
        with pytest.raises(ValueError):
            optimize_pairs(PhysParams(0.3, 5.0), bloch_resolution=4)


class TestClassifier:
    def test_examples(self):
        assert is_markovian(PhysParams(0.0, 1.0))
        assert not is_markovian(PhysParams(0.3, INFINITE))
        assert is_markovian(PhysParams(0.3, 1.0))
        assert is_markovian(PhysParams(0.2, INFINITE))

    def test_direct_model(self):
        assert modes_are_markovian(direct_modes(0.3, 0.7))
        assert not modes_are_markovian(direct_modes(0.3, 0.5))

    def test_agrees_with_nm_at_same_horizon(self):
        for kappa, lam in [(0.3, 0.5), (0.3, 1.0), (0.3, 5.0), (0.35, 1.0), (0.25, 100.0)]:
            p = PhysParams(kappa, lam)
            res = nm_optimal_pair(p)
            assert is_markovian(p, horizon=res.horizon) == (res.nm_value == 0)
