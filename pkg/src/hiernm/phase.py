"""Markovian / non-Markovian threshold and (kappa, lam) phase diagrams."""
from __future__ import annotations

import csv
import json
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .measure import EPS_NM, HorizonWarning, modes_are_markovian, nm_of_modes, nm_optimal_pair
from .model import INFINITE, PhysParams
from .propagator import direct_modes, propagator

DEFAULT_BRACKET = (0.01, 1.0)
KAPPA_FLOOR = 1e-6
KAPPA_CEIL = 100.0


class BracketError(ValueError):
    pass


def fmt(x: float) -> str:
    """Lossless decimal spelling (17 significant digits; 'inf' for the sentinel)."""
    return format(float(x), ".17g")


def _classifier(lam: float, gamma: float, model: str):
    if model == "hierarchical":
        return lambda k: modes_are_markovian(propagator(PhysParams(k, lam, gamma)))
    if model == "direct":
        if math.isinf(lam):
            raise ValueError("the direct model needs a finite lam")
        return lambda k: modes_are_markovian(direct_modes(k, lam))
    raise ValueError(f"unknown model {model!r}")


def threshold_kappa(
    lam: float,
    bracket: Optional[tuple[float, float]] = None,
    tol: float = 1e-4,
    gamma: float = 1.0,
    model: str = "hierarchical",
) -> float:
    """Smallest coupling at which the qubit dynamics turns non-Markovian.

    Bisection on the boolean Markovianity classifier until the bracket is
    narrower than ``tol``; returns the midpoint. Without an explicit bracket
    the default [0.01, 1] gamma is widened until it straddles the transition.
    """
    markovian = _classifier(lam, gamma, model)
    if bracket is None:
        lo, hi = DEFAULT_BRACKET[0] * gamma, DEFAULT_BRACKET[1] * gamma
        while not markovian(lo) and lo > KAPPA_FLOOR * gamma:
            lo /= 2
        while markovian(hi) and hi < KAPPA_CEIL * gamma:
            hi *= 2
    else:
        lo, hi = bracket
    m_lo, m_hi = markovian(lo), markovian(hi)
    if not (m_lo and not m_hi):
        raise BracketError(
            f"bracket [{lo:g}, {hi:g}] at lam={lam:g} does not straddle the threshold: "
            f"kappa_lo is {'Markovian' if m_lo else 'non-Markovian'}, "
            f"kappa_hi is {'Markovian' if m_hi else 'non-Markovian'}"
        )
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if markovian(mid):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass
class PhaseDiagram:
    kappa_axis: np.ndarray
    lambda_axis: np.ndarray
    nm_grid: np.ndarray  # shape (len(kappa_axis), len(lambda_axis))
    threshold_curve: list = field(default_factory=list)  # (lam, kappa_T)
    diagnostics: list = field(default_factory=list)

    def column_sign_changes(self) -> list[int]:
        """Number of sign changes of (NM - EPS_NM) along kappa, per lam column."""
        out = []
        for j in range(self.nm_grid.shape[1]):
            col = self.nm_grid[:, j]
            s = np.sign(col[~np.isnan(col)] - EPS_NM)
            s[s == 0] = 1
            out.append(int(np.count_nonzero(s[1:] != s[:-1])))
        return out

    def write_csv(self, path) -> tuple[Path, Path]:
        """Grid CSV (header row = lam, first column = kappa) and *_threshold.csv."""
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["kappa\\lambda"] + [fmt(x) for x in self.lambda_axis])
            for k, row in zip(self.kappa_axis, self.nm_grid):
                w.writerow([fmt(k)] + [fmt(x) for x in row])
        tpath = path.with_name(path.stem + "_threshold.csv")
        with tpath.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["lambda", "kappa_T"])
            for lam, kt in self.threshold_curve:
                w.writerow([fmt(lam), fmt(kt)])
        return path, tpath

    @classmethod
    def read_csv(cls, path) -> "PhaseDiagram":
        path = Path(path)
        with path.open(newline="") as fh:
            rows = list(csv.reader(fh))
        lam = np.array([float(x) for x in rows[0][1:]])
        kappa = np.array([float(r[0]) for r in rows[1:]])
        grid = np.array([[float(x) for x in r[1:]] for r in rows[1:]])
        curve = []
        tpath = path.with_name(path.stem + "_threshold.csv")
        if tpath.exists():
            with tpath.open(newline="") as fh:
                curve = [(float(a), float(b)) for a, b in list(csv.reader(fh))[1:]]
        return cls(kappa, lam, grid, curve)

    def to_json(self) -> str:
        def enc(x):
            return fmt(x) if not math.isfinite(x) else float(x)

        return json.dumps(
            {
                "kappa": [enc(x) for x in self.kappa_axis],
                "lambda": [enc(x) for x in self.lambda_axis],
                "nm": [[enc(x) for x in row] for row in self.nm_grid],
                "threshold": [[enc(a), enc(b)] for a, b in self.threshold_curve],
                "diagnostics": list(self.diagnostics),
            },
            indent=1,
        )


def _nm_point(args):
    kappa, lam, gamma, horizon, model = args
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", HorizonWarning)
            if model == "direct":
                return nm_of_modes(direct_modes(kappa, lam), horizon).nm_value, None
            return nm_optimal_pair(PhysParams(kappa, lam, gamma), horizon).nm_value, None
    except Exception as exc:  # recorded, never aborts the sweep
        return math.nan, f"kappa={fmt(kappa)} lambda={fmt(lam)}: {type(exc).__name__}: {exc}"


def _threshold_point(args):
    lam, gamma, tol, model = args
    try:
        return threshold_kappa(lam, tol=tol, gamma=gamma, model=model), None
    except Exception as exc:
        return math.nan, f"threshold lambda={fmt(lam)}: {type(exc).__name__}: {exc}"


def default_lambda_axis(n: int = 25, lo: float = 0.05, hi: float = 100.0, with_inf: bool = True) -> np.ndarray:
    axis = np.geomspace(lo, hi, n)
    return np.append(axis, INFINITE) if with_inf else axis


def sweep(
    kappa_grid: Sequence[float],
    lambda_grid: Sequence[float],
    horizon: Optional[float] = None,
    gamma: float = 1.0,
    jobs: int = 1,
    thresholds: bool = True,
    tol: float = 1e-4,
    model: str = "hierarchical",
) -> PhaseDiagram:
    """NM on every grid point plus the threshold curve.

    ``horizon=None`` lets each point pick its own horizon. Results are
    assembled by grid index, so the output does not depend on ``jobs``.
    """
    kappa = np.asarray(kappa_grid, dtype=float)
    lam = np.asarray(lambda_grid, dtype=float)
    for name, axis in (("kappa", kappa), ("lambda", lam)):
        if axis.ndim != 1 or len(axis) == 0:
            raise ValueError(f"{name} grid must be a non-empty 1-d sequence")
        if np.any(np.diff(axis) <= 0):
            raise ValueError(f"{name} grid must be strictly increasing")
    if kappa[0] < 0 or lam[0] <= 0:
        raise ValueError("need kappa >= 0 and lambda > 0")

    points = [(float(k), float(l), gamma, horizon, model) for k in kappa for l in lam]
    tasks = [(float(l), gamma, tol, model) for l in lam] if thresholds else []
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            nm = list(pool.map(_nm_point, points, chunksize=max(1, len(points) // (4 * jobs))))
            th = list(pool.map(_threshold_point, tasks))
    else:
        nm = [_nm_point(a) for a in points]
        th = [_threshold_point(a) for a in tasks]

    grid = np.array([v for v, _ in nm]).reshape(len(kappa), len(lam))
    diagnostics = [d for _, d in nm if d] + [d for _, d in th if d]
    curve = [(float(l), v) for l, (v, _) in zip(lam, th)]
    diagram = PhaseDiagram(kappa, lam, grid, curve, diagnostics)

    changes = diagram.column_sign_changes()
    for j, (l, kt) in enumerate(curve or [(float(x), math.nan) for x in lam]):
        if changes[j] > 1:
            diagnostics.append(f"lambda={fmt(l)}: NM crosses EPS_NM {changes[j]} times along kappa")
        if math.isnan(kt):
            continue
        col = grid[:, j]
        below = (kappa < kt - tol) & (col >= EPS_NM)
        if np.any(below):
            diagnostics.append(f"lambda={fmt(l)}: NM >= EPS_NM below kappa_T={fmt(kt)}")
    return diagram
