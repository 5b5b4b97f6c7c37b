"""Command-line front-end.

Subcommands mirror the engines: panjer, fft, dni, mc, approx, moments,
compare, oracle.  Results print as an aligned table or CSV with the fixed
column set

    engine,alpha,var,es,stderr_or_blank,delta,M,theta,K,n0,samples,seed,seconds

Exit codes: 0 success, 1 engine failure, 2 flag errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import os
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from . import approx as approx_mod
from . import dni as dni_mod
from . import fft as fft_mod
from . import montecarlo as mc_mod
from . import panjer as panjer_mod
from .discretise import Mode, TailPolicy, discretise
from .distributions import parse_frequency, parse_severity
from .errors import AggdistError, EsUndefinedError, TailMassError, UnderflowError
from .grid import CompoundGrid
from .moments import compound_central_moments
from .riskmeasures import es_from_grid, var_from_grid

CSV_COLUMNS = ["engine", "alpha", "var", "es", "stderr_or_blank", "delta", "M",
               "theta", "K", "n0", "samples", "seed", "seconds"]

COMMANDS = ("panjer", "fft", "dni", "mc", "approx", "moments", "compare", "oracle")

_REL_STEP_TOL = 1e-5  # step halving stops once quantiles agree this closely


@dataclass
class RunSpec:
    """Canonical description of one CLI invocation."""

    command: str
    freq: str
    sev: str
    alphas: tuple = (0.999,)
    step: float | None = None
    step_auto: bool = False
    log2m: int | None = None
    tilt: float | None = None
    tilt_auto: bool = False
    cycles: int = 25
    n0: int = 1
    tail_correction: bool = True
    samples: int = 1_000_000
    seed: int = 1
    ci: float | None = None
    alpha_min: float | None = None
    mode: str = "central"
    tail: str = "ignore"
    n_max: int = 256
    fmt: str = "table"
    dump_cdf: str | None = None
    with_es: bool = False

    def render_args(self) -> list[str]:
        argv = [self.command, "--freq", self.freq, "--sev", self.sev,
                "--alpha", ",".join(f"{a:g}" for a in self.alphas),
                "--format", self.fmt, "--mode", self.mode, "--tail", self.tail,
                "--seed", str(self.seed), "--samples", str(self.samples),
                "--cycles", str(self.cycles), "--n0", str(self.n0),
                "--nmax", str(self.n_max)]
        if self.step_auto:
            argv += ["--step", "auto"]
        elif self.step is not None:
            argv += ["--step", f"{self.step:g}"]
        if self.log2m is not None:
            argv += ["--log2m", str(self.log2m)]
        if self.tilt_auto:
            argv += ["--tilt", "auto"]
        elif self.tilt is not None:
            argv += ["--tilt", f"{self.tilt:g}"]
        if not self.tail_correction:
            argv += ["--no-tail-correction"]
        if self.ci is not None:
            argv += ["--ci", f"{self.ci:g}"]
        if self.alpha_min is not None:
            argv += ["--alpha-min", f"{self.alpha_min:g}"]
        if self.dump_cdf:
            argv += ["--dump-cdf", self.dump_cdf]
        if self.with_es:
            argv += ["--es"]
        return argv


@dataclass
class ResultRow:
    engine: str
    alpha: float
    var: float | None
    es: float | None = None
    stderr: float | None = None
    delta: float | None = None
    m_points: int | None = None
    theta: float | None = None
    cycles: int | None = None
    n0: int | None = None
    samples: int | None = None
    seed: int | None = None
    seconds: float = 0.0
    note: str = ""

    def csv_values(self) -> list[str]:
        def fmt(v, spec="{:.10g}"):
            return "" if v is None else spec.format(v)
        return [self.engine, f"{self.alpha:g}", fmt(self.var), fmt(self.es),
                fmt(self.stderr), fmt(self.delta), fmt(self.m_points, "{:d}"),
                fmt(self.theta), fmt(self.cycles, "{:d}"), fmt(self.n0, "{:d}"),
                fmt(self.samples, "{:d}"), fmt(self.seed, "{:d}"),
                f"{self.seconds:.3f}"]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aggdist",
        description="Aggregate loss distributions: engines, risk measures, approximations")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, help=f"{name} engine" if name not in
                           ("approx", "moments", "compare") else name)
        p.add_argument("--freq", required=True, help="frequency spec, e.g. poisson:100")
        p.add_argument("--sev", required=True, help="severity spec, e.g. lognormal:0,2")
        p.add_argument("--alpha", default="0.999",
                       help="comma-separated quantile levels (default 0.999)")
        p.add_argument("--format", dest="fmt", choices=("table", "csv"), default="table")
        p.add_argument("--step", default=None,
                       help="lattice step, or 'auto' to halve until stable")
        p.add_argument("--mode", choices=("central", "forward", "backward"), default="central")
        p.add_argument("--tail", choices=("ignore", "absorb"), default="ignore")
        p.add_argument("--log2m", type=int, default=None, help="FFT size exponent")
        p.add_argument("--tilt", default=None, help="FFT tilt rate, or 'auto' for 20/M")
        p.add_argument("--cycles", type=int, default=25, help="inversion truncation K")
        p.add_argument("--n0", type=int, default=1, help="initial subdivisions per half-cycle")
        p.add_argument("--no-tail-correction", dest="tail_correction", action="store_false")
        p.add_argument("--samples", type=int, default=1_000_000)
        p.add_argument("--seed", type=int, default=1)
        p.add_argument("--ci", type=float, default=None, help="CI level for MC quantiles")
        p.add_argument("--alpha-min", type=float, default=None,
                       help="smallest quantile level the MC run must support")
        p.add_argument("--nmax", type=int, default=256, help="oracle grid length")
        p.add_argument("--dump-cdf", default=None, help="write lattice cdf as x,y lines")
        p.add_argument("--es", dest="with_es", action="store_true",
                       help="also compute expected shortfall")
    return parser


def parse_runspec(argv: list[str]) -> RunSpec:
    ns = build_parser().parse_args(argv)
    alphas = tuple(float(tok) for tok in str(ns.alpha).split(",") if tok)
    step_auto = ns.step == "auto"
    tilt_auto = ns.tilt == "auto"
    return RunSpec(
        command=ns.command, freq=ns.freq, sev=ns.sev, alphas=alphas,
        step=None if (ns.step is None or step_auto) else float(ns.step),
        step_auto=step_auto,
        log2m=ns.log2m,
        tilt=None if (ns.tilt is None or tilt_auto) else float(ns.tilt),
        tilt_auto=tilt_auto,
        cycles=ns.cycles, n0=ns.n0, tail_correction=ns.tail_correction,
        samples=ns.samples, seed=ns.seed, ci=ns.ci, alpha_min=ns.alpha_min,
        mode=ns.mode, tail=ns.tail, n_max=ns.nmax, fmt=ns.fmt,
        dump_cdf=ns.dump_cdf, with_es=ns.with_es)


def _mode(spec: RunSpec) -> Mode:
    return {"central": Mode.CENTRAL, "forward": Mode.FORWARD,
            "backward": Mode.BACKWARD}[spec.mode]


def _tail(spec: RunSpec) -> TailPolicy:
    return {"ignore": TailPolicy.IGNORE, "absorb": TailPolicy.ABSORB_LAST}[spec.tail]


def _maybe_es(grid: CompoundGrid, alpha: float) -> float | None:
    try:
        return es_from_grid(grid, alpha)
    except (TailMassError, AggdistError):
        return None


def _dump_cdf(grid: CompoundGrid, path: str):
    with open(path, "w") as fh:
        for x, y in zip(grid.lattice, grid.cdf):
            fh.write(f"{x:.10g},{y:.15g}\n")


def _panjer_grid(spec: RunSpec, freq, sev, alpha: float, step: float):
    target = max([alpha, *spec.alphas]) if not spec.with_es else 1.0 - 1e-7
    q, grid = panjer_mod.panjer_quantile(freq, sev, step, target,
                                         _mode(spec), _tail(spec))
    return grid


def _auto_step(run_once, start_step: float = 8.0, max_halvings: int = 12):
    """Halve the lattice step until two successive quantiles are stable."""
    step = start_step
    prev = None
    for _ in range(max_halvings):
        q = run_once(step)
        if prev is not None and abs(q - prev) <= _REL_STEP_TOL * max(abs(q), 1e-300):
            return step, q
        prev = q
        step *= 0.5
    return step * 2.0, prev


def run_panjer(spec: RunSpec, freq, sev) -> list[ResultRow]:
    rows = []
    for alpha in spec.alphas:
        t0 = time.perf_counter()
        if spec.step_auto:
            step, _ = _auto_step(lambda s: panjer_mod.panjer_quantile(freq, sev, s, alpha,
                                                                      _mode(spec), _tail(spec))[0])
        else:
            step = spec.step if spec.step is not None else 1.0
        grid = _panjer_grid(spec, freq, sev, alpha, step)
        var = var_from_grid(grid, alpha)
        es = _maybe_es(grid, alpha) if spec.with_es else None
        rows.append(ResultRow("panjer", alpha, var, es=es, delta=step,
                              seconds=time.perf_counter() - t0))
        if spec.dump_cdf:
            _dump_cdf(grid, spec.dump_cdf)
    return rows


def _fft_grid(spec: RunSpec, freq, sev, alpha: float, step: float, log2m: int | None):
    if log2m is None:
        guess = approx_mod.heavy_tail_var(freq, sev, alpha) \
            or approx_mod.normal_approx_quantile(freq, sev, alpha) or 1.0
        m = 1 << max(int(math.ceil(math.log2(max(2.0 * guess / step, 16.0)))), 4)
        prev = None
        for _ in range(12):
            grid = _fft_once(spec, freq, sev, step, m)
            try:
                q = var_from_grid(grid, alpha)
            except AggdistError:
                q = None
            if q is not None and prev is not None and q == prev:
                return grid, m
            prev = q
            m *= 2
        return grid, m // 2
    m = 1 << log2m
    return _fft_once(spec, freq, sev, step, m), m


def _fft_once(spec: RunSpec, freq, sev, step: float, m: int) -> CompoundGrid:
    disc = discretise(sev, step, m, _mode(spec), _tail(spec))
    theta = fft_mod.default_tilt(m) if spec.tilt_auto else (spec.tilt or 0.0)
    return fft_mod.compound_via_fft(disc, freq, m, theta=theta)


def run_fft(spec: RunSpec, freq, sev) -> list[ResultRow]:
    rows = []
    for alpha in spec.alphas:
        t0 = time.perf_counter()
        step = spec.step if spec.step is not None else 1.0
        if spec.step_auto:
            step, _ = _auto_step(
                lambda s: var_from_grid(_fft_grid(spec, freq, sev, alpha, s, spec.log2m)[0], alpha))
        grid, m = _fft_grid(spec, freq, sev, alpha, step, spec.log2m)
        var = var_from_grid(grid, alpha)
        es = _maybe_es(grid, alpha) if spec.with_es else None
        theta = grid.settings.get("theta")
        rows.append(ResultRow("fft", alpha, var, es=es, delta=step, m_points=m,
                              theta=theta, seconds=time.perf_counter() - t0))
        if spec.dump_cdf:
            _dump_cdf(grid, spec.dump_cdf)
    return rows


def run_dni(spec: RunSpec, freq, sev) -> list[ResultRow]:
    settings = dni_mod.DniSettings(cycles=spec.cycles, n0=spec.n0,
                                   tail_correction=spec.tail_correction)
    evaluator = dni_mod.ForwardCfEvaluator(sev, settings.forward_tol)
    rows = []
    for alpha in spec.alphas:
        t0 = time.perf_counter()
        var = dni_mod.dni_quantile(freq, sev, alpha, settings, evaluator)
        es = None
        if spec.with_es:
            try:
                h_q = dni_mod.dni_cdf(freq, sev, var, settings, evaluator)
                es = dni_mod.es_via_cf(freq, sev, var, h_q, settings, evaluator)
            except EsUndefinedError:
                es = None
        rows.append(ResultRow("dni", alpha, var, es=es, cycles=spec.cycles,
                              n0=spec.n0, seconds=time.perf_counter() - t0))
    return rows


def run_mc(spec: RunSpec, freq, sev) -> list[ResultRow]:
    alpha_min = spec.alpha_min if spec.alpha_min is not None else min(min(spec.alphas), 0.99)
    t0 = time.perf_counter()
    run = mc_mod.simulate_compound(freq, sev, spec.samples, spec.seed, alpha_min=alpha_min)
    base = time.perf_counter() - t0
    rows = []
    for alpha in spec.alphas:
        t0 = time.perf_counter()
        var = mc_mod.mc_quantile(run, alpha)
        stderr = None
        if spec.ci is not None:
            stderr = mc_mod.mc_quantile_ci(run, alpha, spec.ci).half_width
        es = mc_mod.mc_es(run, alpha, var)[0] if spec.with_es else None
        rows.append(ResultRow("mc", alpha, var, es=es, stderr=stderr,
                              samples=spec.samples, seed=spec.seed,
                              seconds=base + time.perf_counter() - t0))
    return rows


def run_approx(spec: RunSpec, freq, sev) -> list[ResultRow]:
    rows = []
    fit = approx_mod.translated_gamma_fit(freq, sev)
    for alpha in spec.alphas:
        t0 = time.perf_counter()
        for name, val in (
                ("approx-normal", approx_mod.normal_approx_quantile(freq, sev, alpha)),
                ("approx-tgamma", fit.quantile(alpha) if fit is not None else None),
                ("approx-heavytail", approx_mod.heavy_tail_var(freq, sev, alpha))):
            rows.append(ResultRow(name, alpha, val, seconds=time.perf_counter() - t0,
                                  note=approx_mod.APPROX_QUALITY[name.split("-", 1)[1]
                                                                 .replace("tgamma", "translated-gamma")
                                                                 .replace("heavytail", "heavy-tail")]))
    return rows


def run_moments(spec: RunSpec, freq, sev) -> list[ResultRow]:
    mom = compound_central_moments(freq, sev)
    out = [("mean", mom.mean), ("variance", mom.variance),
           ("central3", mom.central3), ("central4", mom.central4),
           ("skewness", mom.skewness), ("kurtosis", mom.kurtosis)]
    rows = []
    for name, val in out:
        rows.append(ResultRow(f"moments-{name}", spec.alphas[0],
                              None if math.isinf(val) else val,
                              note="infinite" if math.isinf(val) else ""))
    return rows


def run_oracle(spec: RunSpec, freq, sev) -> list[ResultRow]:
    step = spec.step if spec.step is not None else 1.0
    t0 = time.perf_counter()
    disc = discretise(sev, step, spec.n_max + 1, _mode(spec), _tail(spec))
    grid = panjer_mod.brute_force_convolution(disc, freq, spec.n_max)
    rows = []
    for alpha in spec.alphas:
        var = var_from_grid(grid, alpha)
        es = _maybe_es(grid, alpha) if spec.with_es else None
        rows.append(ResultRow("oracle", alpha, var, es=es, delta=step,
                              seconds=time.perf_counter() - t0))
    if spec.dump_cdf:
        _dump_cdf(grid, spec.dump_cdf)
    return rows


def run_compare(spec: RunSpec, freq, sev) -> list[ResultRow]:
    rows = []
    rows += run_panjer(spec, freq, sev)
    rows += run_fft(spec, freq, sev)
    rows += run_dni(spec, freq, sev)
    rows += run_mc(spec, freq, sev)
    rows += run_approx(spec, freq, sev)
    return rows


_RUNNERS = {
    "panjer": run_panjer, "fft": run_fft, "dni": run_dni, "mc": run_mc,
    "approx": run_approx, "moments": run_moments, "compare": run_compare,
    "oracle": run_oracle,
}


def render_table(rows: list[ResultRow]) -> str:
    headers = CSV_COLUMNS
    table = [headers] + [r.csv_values() for r in rows]
    widths = [max(len(row[i]) for row in table) for i in range(len(headers))]
    lines = []
    for row in table:
        lines.append("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip())
    return "\n".join(lines)


def render_csv(rows: list[ResultRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in rows:
        writer.writerow(r.csv_values())
    return buf.getvalue()


def parse_csv_output(text: str) -> list[dict]:
    """Strict round-trip parser for the CSV emitted by render_csv."""
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if header != CSV_COLUMNS:
        raise ValueError(f"unexpected CSV header: {header}")
    out = []
    for row in reader:
        if len(row) != len(CSV_COLUMNS):
            raise ValueError(f"row has {len(row)} fields, expected {len(CSV_COLUMNS)}")
        rec = dict(zip(CSV_COLUMNS, row))
        for key in ("alpha", "var", "es", "stderr_or_blank", "delta", "theta", "seconds"):
            if rec[key]:
                rec[key] = float(rec[key])
        for key in ("M", "K", "n0", "samples", "seed"):
            if rec[key]:
                rec[key] = int(rec[key])
        out.append(rec)
    return out


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    try:
        spec = parse_runspec(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        freq = parse_frequency(spec.freq)
        sev = parse_severity(spec.sev)
        rows = _RUNNERS[spec.command](spec, freq, sev)
    except AggdistError as exc:
        print(f"aggdist: error: {exc}", file=sys.stderr)
        return 1
    print(render_csv(rows) if spec.fmt == "csv" else render_table(rows), end="")
    if spec.fmt == "table":
        print()
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
