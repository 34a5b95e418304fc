"""Command-line front end.

    hiernm gfunc --kappa 0.3 --lambda 0.5 --tmax 50
    hiernm trace-distance --kappa 0.3 --lambda 5
    hiernm nm --kappa 0.3 --lambda inf
    hiernm threshold --lambda inf
    hiernm sweep --kappa-range 0:1:41 --lambda-range 0.05:100:25 --log --with-inf --out sweep.csv
    hiernm verify --kappa 0.3 --lambda 0.5

Rates are in units of gamma and times in units of 1/gamma. Numbers are
written with 17 significant digits. Exit codes: 0 success, 1 computation or
I/O error, 2 usage error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import measure, oracle, phase
from .model import INFINITE, DensityMatrix2, ModelError, PhysParams, TimeGrid, trace_distance_model
from .propagator import PropagatorError, direct_modes, g_memoryless, propagator

COMMANDS = ("gfunc", "trace-distance", "nm", "threshold", "sweep", "verify")
VERIFY_TOL = 1e-6


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    params: Optional[PhysParams] = None
    grid: Optional[TimeGrid] = None
    output_path: Optional[str] = None
    format: str = "csv"
    model: str = "hierarchical"
    horizon: Optional[float] = None
    tol: float = 1e-4
    jobs: int = 1
    kappa_grid: Optional[np.ndarray] = None
    lambda_grid: Optional[np.ndarray] = None
    thresholds: bool = True
    pair: tuple = field(default_factory=lambda: (DensityMatrix2.plus(), DensityMatrix2.minus()))


def _rate(text: str) -> float:
    try:
        x = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if math.isnan(x):
        raise argparse.ArgumentTypeError("NaN is not allowed")
    return x


def _lambda(text: str) -> float:
    if text.strip().lower() in ("inf", "infinity", "+inf"):
        return INFINITE
    x = _rate(text)
    if not (x > 0 and math.isfinite(x)):
        raise argparse.ArgumentTypeError(f"lambda must be > 0 or 'inf', got {text!r}")
    return x


def _positive(text: str) -> float:
    x = _rate(text)
    if not (x > 0 and math.isfinite(x)):
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text!r}")
    return x


def _jobs(text: str) -> int:
    try:
        n = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if n < 1:
        raise argparse.ArgumentTypeError("--jobs must be >= 1")
    return n


def _range(text: str):
    parts = text.split(":")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"range must look like a:b:n, got {text!r}")
    a, b = _rate(parts[0]), _rate(parts[1])
    try:
        n = int(parts[2])
    except ValueError:
        raise argparse.ArgumentTypeError(f"range count must be an integer, got {parts[2]!r}") from None
    if n < 1 or not (math.isfinite(a) and math.isfinite(b)):
        raise argparse.ArgumentTypeError(f"bad range {text!r}")
    if n > 1 and not b > a:
        raise argparse.ArgumentTypeError(f"range end must exceed start in {text!r}")
    return a, b, n


def _bloch(text: str) -> DensityMatrix2:
    parts = text.split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"state must be THETA,PHI, got {text!r}")
    th, ph = _rate(parts[0]), _rate(parts[1])
    if not (math.isfinite(th) and math.isfinite(ph)):
        raise argparse.ArgumentTypeError("Bloch angles must be finite")
    return DensityMatrix2.pure(th, ph)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hiernm", description="Qubit in a cavity + Lorentzian reservoir: propagator and non-Markovianity.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def physical(p, lam_required=True, kappa=True):
        if kappa:
            p.add_argument("--kappa", type=_rate, required=True, help="qubit-cavity coupling (units of gamma)")
        p.add_argument("--lambda", dest="lam", type=_lambda, required=lam_required, help="reservoir width, or 'inf'")
        p.add_argument("--gamma", type=_positive, default=1.0)

    def output(p):
        p.add_argument("--out", help="output file (default: stdout)")
        p.add_argument("--format", choices=("csv", "json"), default="csv")

    def model(p):
        p.add_argument("--model", choices=("hierarchical", "direct"), default="hierarchical",
                       help="'direct' drops the cavity (qubit coupled straight to the reservoir)")

    g = sub.add_parser("gfunc", help="write t, G(t)")
    physical(g)
    g.add_argument("--tmax", type=_positive, default=50.0)
    g.add_argument("--dt", type=_positive, default=1e-3)
    model(g)
    output(g)

    td = sub.add_parser("trace-distance", help="write t, D(t) for a pair of pure states")
    physical(td)
    td.add_argument("--tmax", type=_positive, default=50.0)
    td.add_argument("--dt", type=_positive, default=1e-3)
    td.add_argument("--state1", type=_bloch, help="Bloch angles THETA,PHI (default |+>)")
    td.add_argument("--state2", type=_bloch, help="Bloch angles THETA,PHI (default |->)")
    model(td)
    output(td)

    nm = sub.add_parser("nm", help="non-Markovianity of the optimal pair")
    physical(nm)
    nm.add_argument("--horizon", type=_positive)
    model(nm)
    output(nm)

    th = sub.add_parser("threshold", help="critical coupling kappa_T(lambda)")
    physical(th, kappa=False)
    th.add_argument("--tol", type=_positive, default=1e-4)
    model(th)
    output(th)

    sw = sub.add_parser("sweep", help="phase diagram over (kappa, lambda)")
    sw.add_argument("--kappa-range", type=_range, default=(0.0, 1.0, 41))
    sw.add_argument("--lambda-range", type=_range, default=(0.05, 100.0, 25))
    sw.add_argument("--log", action="store_true", help="log-spaced lambda axis")
    sw.add_argument("--with-inf", action="store_true", help="append the lambda = inf column")
    sw.add_argument("--gamma", type=_positive, default=1.0)
    sw.add_argument("--horizon", type=_positive)
    sw.add_argument("--tol", type=_positive, default=1e-4)
    sw.add_argument("--no-threshold", action="store_true")
    sw.add_argument("--jobs", type=_jobs, default=None)
    model(sw)
    sw.add_argument("--out", default="sweep.csv")
    sw.add_argument("--format", choices=("csv", "json"), default="csv")

    v = sub.add_parser("verify", help="analytic propagator vs. amplitude-equation integration")
    physical(v)
    v.add_argument("--tmax", type=_positive, default=50.0)
    v.add_argument("--dt", type=_positive)
    output(v)
    return parser


def _default_jobs() -> int:
    env = os.environ.get("HIERNM_JOBS")
    if env is None:
        return 1
    try:
        return _jobs(env)
    except argparse.ArgumentTypeError as exc:
        raise UsageError(f"hiernm: error: HIERNM_JOBS: {exc}") from None


def parse_args(argv) -> RunConfig:
    """Parse and validate; raises UsageError on bad input."""
    ns = build_parser().parse_args(argv)
    cfg = RunConfig(command=ns.command, format=ns.format, output_path=ns.out)
    cfg.model = getattr(ns, "model", "hierarchical")
    try:
        if ns.command == "sweep":
            ka, kb, kn = ns.kappa_range
            la, lb, ln = ns.lambda_range
            if ka < 0 or la <= 0:
                raise UsageError("hiernm: error: sweep ranges need kappa >= 0 and lambda > 0")
            cfg.kappa_grid = np.linspace(ka, kb, kn)
            cfg.lambda_grid = np.geomspace(la, lb, ln) if ns.log else np.linspace(la, lb, ln)
            if ns.with_inf:
                if cfg.model == "direct":
                    raise UsageError("hiernm: error: --with-inf is not available for the direct model")
                cfg.lambda_grid = np.append(cfg.lambda_grid, INFINITE)
            cfg.horizon, cfg.tol = ns.horizon, ns.tol
            cfg.thresholds = not ns.no_threshold
            cfg.jobs = ns.jobs if ns.jobs is not None else _default_jobs()
            cfg.params = PhysParams(0.0, 1.0, ns.gamma)
            return cfg
        kappa = getattr(ns, "kappa", 0.0)
        cfg.params = PhysParams(kappa, ns.lam, ns.gamma)
        if cfg.model == "direct" and cfg.params.memoryless:
            raise UsageError("hiernm: error: the direct model needs a finite --lambda")
        if ns.command in ("gfunc", "trace-distance"):
            cfg.grid = TimeGrid(ns.tmax, ns.dt)
        if ns.command == "verify":
            dt = ns.dt if ns.dt is not None else oracle.default_dt(cfg.params)
            cfg.grid = TimeGrid(ns.tmax, dt)
        if ns.command == "trace-distance":
            cfg.pair = (ns.state1 or DensityMatrix2.plus(), ns.state2 or DensityMatrix2.minus())
        if ns.command == "nm":
            cfg.horizon = ns.horizon
        if ns.command == "threshold":
            cfg.tol = ns.tol
    except ModelError as exc:
        raise UsageError(f"hiernm: error: {exc}") from None
    return cfg


def _modes(cfg: RunConfig):
    p = cfg.params
    if cfg.model == "direct":
        return direct_modes(p.kappa, p.lam)
    return propagator(p)


def _table(columns: dict, fmt_name: str) -> str:
    names = list(columns)
    if fmt_name == "json":
        return json.dumps({k: [float(x) for x in v] for k, v in columns.items()}) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(names)
    for row in zip(*columns.values()):
        w.writerow([phase.fmt(x) for x in row])
    return buf.getvalue()


def _emit(text: str, path: Optional[str]) -> None:
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _nm_report(res: measure.NMResult) -> dict:
    return {
        "nm": res.nm_value,
        "classification": "Markovian" if res.markovian else "non-Markovian",
        "horizon": res.horizon,
        "truncation_bound": res.truncation_bound,
        "rises": [list(r) for r in res.rises],
        "warnings": list(res.warnings),
    }


def run(cfg: RunConfig) -> int:
    f = phase.fmt
    if cfg.command == "gfunc":
        t = cfg.grid.times
        _emit(_table({"t": t, "G": _modes(cfg)(t)}, cfg.format), cfg.output_path)

    elif cfg.command == "trace-distance":
        t = cfg.grid.times
        g = _modes(cfg)(t)
        r1, r2 = cfg.pair
        da, db = r1.ee - r2.ee, r1.eg - r2.eg
        d = np.array([trace_distance_model(x, da, db) for x in g])
        _emit(_table({"t": t, "D": d}, cfg.format), cfg.output_path)

    elif cfg.command == "nm":
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", measure.HorizonWarning)
            res = measure.nm_of_modes(_modes(cfg), cfg.horizon)
        rep = _nm_report(res)
        if cfg.format == "json":
            text = json.dumps(rep) + "\n"
        else:
            lines = [
                f"nm = {f(res.nm_value)}",
                f"classification = {rep['classification']}",
                f"horizon = {f(res.horizon)}",
                f"truncation_bound = {f(res.truncation_bound)}",
                f"rises = {len(res.rises)}",
            ]
            lines += [f"rise {f(a)} {f(b)} {f(gain)}" for a, b, gain in res.rises]
            lines += [f"warning: {w}" for w in res.warnings]
            text = "\n".join(lines) + "\n"
        _emit(text, cfg.output_path)

    elif cfg.command == "threshold":
        p = cfg.params
        kt = phase.threshold_kappa(p.lam, tol=cfg.tol, gamma=p.gamma, model=cfg.model)
        if cfg.format == "json":
            text = json.dumps({"lambda": f(p.lam), "kappa_T": kt, "tol": cfg.tol / 2}) + "\n"
        else:
            text = f"kappa_T = {f(kt)} +/- {f(cfg.tol / 2)} (lambda = {f(p.lam)})\n"
        _emit(text, cfg.output_path)

    elif cfg.command == "sweep":
        diagram = phase.sweep(
            cfg.kappa_grid, cfg.lambda_grid, horizon=cfg.horizon, gamma=cfg.params.gamma,
            jobs=cfg.jobs, thresholds=cfg.thresholds, tol=cfg.tol, model=cfg.model,
        )
        if cfg.format == "json":
            _emit(diagram.to_json() + "\n", cfg.output_path)
            written = [cfg.output_path]
        else:
            written = [str(x) for x in diagram.write_csv(cfg.output_path)]
        for d in diagram.diagnostics:
            print(f"diagnostic: {d}", file=sys.stderr)
        print("wrote " + ", ".join(written))

    elif cfg.command == "verify":
        p = cfg.params
        t = cfg.grid.times
        a = oracle.integrate(p, cfg.grid)
        g = g_memoryless(p.kappa, p.gamma, t) if p.memoryless else propagator(p)(t)
        dev = float(np.max(np.abs(g - a)))
        ok = dev < VERIFY_TOL
        if cfg.format == "json":
            text = json.dumps({"max_deviation": dev, "tolerance": VERIFY_TOL, "ok": ok}) + "\n"
        else:
            text = f"max |G_analytic - A_oracle| = {f(dev)} ({'ok' if ok else 'FAIL'}, tol {f(VERIFY_TOL)})\n"
        _emit(text, cfg.output_path)
        return 0 if ok else 1
    return 0


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        cfg = parse_args(argv)
    except UsageError as exc:
        build_parser().print_usage(sys.stderr)
        print(exc, file=sys.stderr)
        return 2
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    try:
        return run(cfg)
    except (ModelError, PropagatorError, phase.BracketError, ValueError, ArithmeticError, OSError, RuntimeError) as exc:
        print(f"hiernm: error: {exc}", file=sys.stderr)
        return 1
