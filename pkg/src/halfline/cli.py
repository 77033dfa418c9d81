"""Command-line runner for the experiments.

Usage::

    halfline <kind> --config FILE [--out DIR]
    halfline run FILE [--out DIR]
    halfline free-check [--out DIR]

Exit status is 0 on success, 1 when a scientific check fails and 2 for
usage, configuration or numerical errors.  The number of worker threads is
read from ``HALFLINE_THREADS`` (default 1); outputs are always written in
grid order.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import __version__
from .clock import clock_experiment
from .config import ExperimentConfig, KINDS, load_config, parse_config, parse_list
from .errors import ConfigError, HalflineError
from .floquet import dos_table, find_bands
from .kernel import (
    SpectralWeightModel,
    kernel_matrix,
    kernel_quadrature_matrix,
    pin_weight_constant,
    reproduce_check,
)
from .potential import PotentialSpec, free
from .propagate import IntegratorConfig
from .regularity import growth_exponent
from .universality import convergence_table, free_limit, offset_grid, reference_density

__all__ = ["main", "run", "free_check", "CheckRow", "thread_count"]

EXIT_OK, EXIT_CHECK_FAILED, EXIT_ERROR = 0, 1, 2


# ---------------------------------------------------------------- plumbing


def thread_count() -> int:
    raw = os.environ.get("HALFLINE_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"HALFLINE_THREADS must be an integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError("HALFLINE_THREADS must be >= 1")
    return n


def _pmap(fn, items):
    """Ordered map, threaded when HALFLINE_THREADS > 1 (numpy releases the GIL)."""
    items = list(items)
    n = thread_count()
    if n == 1 or len(items) < 2:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, items))


def _fmt(v, precision):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), f".{precision}g")
    return str(v)


def _jsonable(v, precision):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        f = float(format(float(v), f".{precision}g"))
        return f if math.isfinite(f) else str(f)
    if isinstance(v, dict):
        return {str(k): _jsonable(x, precision) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x, precision) for x in v]
    return v


def _meta_lines(cfg: ExperimentConfig) -> list[str]:
    lines = [f"halfline {__version__}", f"config-sha256 {cfg.sha256}"]
    lines += [f"config {line}" for line in cfg.text.splitlines() if line.strip()]
    return lines


def write_table(path: Path, cfg: ExperimentConfig, columns, rows):
    """CSV with '#' metadata lines, or JSON with a meta block, per the config format."""
    if cfg.fmt == "json":
        path = path.with_suffix(".json")
        doc = {
            "meta": {"version": __version__, "config_sha256": cfg.sha256, "config": cfg.text},
            "columns": list(columns),
            "rows": [dict(zip(columns, _jsonable(list(r), cfg.precision))) for r in rows],
        }
        path.write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")
        return path
    with open(path, "w", newline="", encoding="utf-8") as fh:
        for line in _meta_lines(cfg):
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(v, cfg.precision) for v in r])
    return path


def write_summary(path: Path, cfg: ExperimentConfig, summary: dict):
    doc = {"meta": {"version": __version__, "config_sha256": cfg.sha256}, **summary}
    path.write_text(json.dumps(_jsonable(doc, cfg.precision), indent=1, sort_keys=True) + "\n", encoding="utf-8")
    return path


# ---------------------------------------------------------------- energies and bands


def _bands_covering(spec: PotentialSpec, n_bands: int, cfg: IntegratorConfig | None = None):
    bg = spec.background()
    P = bg.period
    xi_max = bg.min_background() + (np.pi / P) ** 2 * (n_bands + 1) ** 2 + 1.0
    for _ in range(20):
        bs = find_bands(bg, xi_max)
        complete = len(bs.bands) - (1 if bs.truncated else 0)
        if complete >= n_bands:
            return bs
        xi_max = 2.0 * xi_max + 1.0
    raise ConfigError(f"could not locate {n_bands} bands")


def _energy(spec: PotentialSpec, token: str, cache: dict) -> float:
    token = token.strip()
    if token.startswith("mid-band:"):
        if not spec.is_periodic:
            raise ConfigError(f"{token}: mid-band energies need a periodic base")
        n = int(token.split(":", 1)[1])
        bs = cache.get(n)
        if bs is None:
            bs = cache[n] = _bands_covering(spec, n + 1)
        l, r = bs.bands[n]
        return 0.5 * (l + r)
    try:
        return float(token)
    except ValueError:
        raise ConfigError(f"[experiment] expected a number or mid-band:N, got {token!r}") from None


def _energies(spec, text, cache):
    return [_energy(spec, t, cache) for t in parse_list(text)]


def _floats(text):
    try:
        return [float(t) for t in parse_list(text)]
    except ValueError:
        raise ConfigError(f"[experiment] expected numbers, got {text!r}") from None


def _shifted(cfg: ExperimentConfig) -> ExperimentConfig:
    """Apply the spectrum-bottom normalisation (first band starts at 0)."""
    if not cfg.shift_to_bottom:
        return cfg
    bs = _bands_covering(cfg.potential, 1)
    spec = cfg.potential
    moved = PotentialSpec(spec.base, spec.perturbation, spec.energy_shift - bs.bands[0][0])
    return replace(cfg, potential=moved)


# ---------------------------------------------------------------- experiments


@dataclass(frozen=True)
class Outcome:
    files: tuple
    passed: bool = True
    message: str = ""


def _run_bands(cfg, out: Path) -> Outcome:
    p = cfg.params
    spec = cfg.potential
    scan = float(p["scan_step"]) if "scan_step" in p else None
    bs = find_bands(spec.background(), float(p["xi_max"]), scan_step=scan, cfg=cfg.integrator)
    rows = [(n, l, r, bs.open_gap_width(n)) for n, (l, r) in enumerate(bs.bands)]
    f = write_table(out / "bands.csv", cfg, ("n", "l_n", "r_n", "open_gap_width"), rows)
    return Outcome((f,))


def _run_dos(cfg, out: Path) -> Outcome:
    p = cfg.params
    bs = find_bands(cfg.potential.background(), float(p["xi_max"]), cfg=cfg.integrator)
    table = dos_table(bs, int(p["points_per_band"]))
    f = write_table(out / "dos.csv", cfg, ("xi", "theta", "rho"), table.tolist())
    return Outcome((f,))


def _run_kernel(cfg, out: Path) -> Outcome:
    p = cfg.params
    spec = cfg.potential
    e = np.array(_energies(spec, p["energies"], {}))
    methods = parse_list(p["methods"])
    bad = sorted(set(methods) - {"christoffel-darboux", "quadrature"})
    if bad:
        raise ConfigError(f"[experiment] unknown kernel method(s): {', '.join(bad)}")
    Ls = _floats(p["lengths"])

    def one(L):
        res = {}
        if "christoffel-darboux" in methods:
            res["christoffel-darboux"] = (kernel_matrix(spec, e, L, cfg.integrator), None)
        if "quadrature" in methods:
            res["quadrature"] = kernel_quadrature_matrix(spec, e, L, cfg.integrator)
        return res

    rows = []
    for L, res in zip(Ls, _pmap(one, Ls)):
        for i in range(e.size):
            for j in range(i, e.size):
                for m in methods:
                    S, err = res[m]
                    method = "diagonal-variational" if (m == "christoffel-darboux" and i == j) else m
                    est = float(err[i, j]) if err is not None else 4 * np.finfo(float).eps * abs(S[i, j])
                    rows.append((e[i], e[j], L, S[i, j], method, est))
    f = write_table(out / "kernel.csv", cfg, ("xi", "beta", "L", "value", "method", "err_estimate"), rows)
    return Outcome((f,))


def _run_universality(cfg, out: Path) -> Outcome:
    p = cfg.params
    spec = cfg.potential
    xi0 = _energy(spec, p["xi0"], {})
    Ls = _floats(p["lengths"])
    offsets = offset_grid(float(p["offset_bound"]), int(p["offset_points"]))
    bands = None
    if spec.is_periodic and not spec.is_free:
        bands = find_bands(spec.background(), xi0 + 1.0, cfg=cfg.integrator)
    rho0 = reference_density(spec, xi0, bands, cfg.integrator)
    reps = _pmap(lambda L: convergence_table(spec, xi0, offsets, [L], cfg.integrator, bands, rho0), Ls)
    rows = [(r.L, r.xi0, r.a, r.b, r.ratio, r.reference, r.abs_error) for rep in reps for r in rep.rows]
    f1 = write_table(out / "universality.csv", cfg, ("L", "xi0", "a", "b", "ratio", "reference", "abs_error"), rows)
    sup = {L: rep.sup_error[L] for L, rep in zip(Ls, reps)}
    errs = [sup[L] for L in Ls]
    summary = {
        "xi0": xi0,
        "rho": rho0,
        "sup_error": {_fmt(L, 17): v for L, v in sup.items()},
        "moving_diagonal": {_fmt(L, 17): rep.moving_diagonal[L] for L, rep in zip(Ls, reps)},
        "stretch": {f"{_fmt(L, 17)}@{eps}": v for rep in reps for (L, eps), v in rep.stretch.items()},
        "strictly_decreasing": all(b < a for a, b in zip(errs, errs[1:])),
    }
    passed = True
    if "max_error" in p:
        passed = errs[-1] <= float(p["max_error"])
        summary["max_error"] = float(p["max_error"])
        summary["passed"] = passed
    f2 = write_summary(out / "summary.json", cfg, summary)
    msg = "" if passed else f"universality sup error {errs[-1]:.3g} exceeds {p['max_error']}"
    return Outcome((f1, f2), passed, msg)


def _run_clock(cfg, out: Path) -> Outcome:
    p = cfg.params
    spec = cfg.potential
    xi_star = _energy(spec, p["xi_star"], {})
    L = float(p["length"])
    n_range = int(p["n_range"])
    bcs = ["neumann", "dirichlet"] if p["boundary"].strip() == "both" else [p["boundary"].strip()]
    bands = None
    if spec.is_periodic and not spec.is_free:
        bands = find_bands(spec.background(), xi_star + 1.0, cfg=cfg.integrator)
    reps = _pmap(lambda bc: clock_experiment(spec, L, xi_star, n_range, bc, cfg.integrator, bands), bcs)
    files, summary = [], {"L": L, "xi_star": xi_star, "rho": reps[0].rho}
    for rep in reps:
        rows = [(n, rep.zeros[k], rep.spacings[k], rep.scaled_spacings[k])
                for k, n in enumerate(rep.indices[:-1])]
        name = "clock.csv" if len(reps) == 1 else f"clock-{rep.bc}.csv"
        files.append(write_table(out / name, cfg, ("n", "xi_n", "spacing", "scaled_spacing"), rows))
        summary[f"max_deviation_{rep.bc}"] = rep.max_deviation
    summary["max_deviation"] = max(r.max_deviation for r in reps)
    passed = True
    if len(reps) == 2:
        a, b = reps[0].max_deviation, reps[1].max_deviation
        summary["boundary_ratio"] = max(a, b) / min(a, b) if min(a, b) > 0 else (1.0 if a == b else math.inf)
    if "max_deviation" in p:
        passed = summary["max_deviation"] <= float(p["max_deviation"])
        summary["passed"] = passed
    files.append(write_summary(out / "summary.json", cfg, summary))
    msg = "" if passed else f"clock deviation {summary['max_deviation']:.3g} exceeds {p['max_deviation']}"
    return Outcome(tuple(files), passed, msg)


def _run_regularity(cfg, out: Path) -> Outcome:
    p = cfg.params
    spec = cfg.potential
    energies = _energies(spec, p["energies"], {})
    Ls = _floats(p["lengths"])
    fits = _pmap(lambda x: growth_exponent(spec, x, Ls, cfg.integrator), energies)
    rows = [(g.xi, L, v) for g in fits for L, v in zip(g.L_list, g.log_norms)]
    f1 = write_table(out / "regularity.csv", cfg, ("xi", "L", "log_norm"), rows)
    summary = {"fits": [{"xi": g.xi, "slope": g.slope, "slope_ci": g.slope_ci,
                         "exponential": g.exponential} for g in fits]}
    f2 = write_summary(out / "summary.json", cfg, summary)
    return Outcome((f1, f2))


# ---------------------------------------------------------------- closed-form suite


@dataclass(frozen=True)
class CheckRow:
    check: str
    measured: float
    expected: float
    residual: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(self.residual <= self.tolerance)


def _free_kernel_closed(a, b, L):
    ka, kb = np.sqrt(a), np.sqrt(b)
    d, s = ka - kb, ka + kb
    first = np.where(d == 0, L / 2, np.sin(d * L) / (2 * np.where(d == 0, 1.0, d)))
    return first + np.sin(s * L) / (2 * s)


def free_check(cfg: IntegratorConfig | None = None) -> list[CheckRow]:
    """Closed-form oracle suite for the free operator on a fixed parameter set."""
    rows = []
    g = np.linspace(0.5, 10.0, 6)
    A, B = np.meshgrid(g, g, indexing="ij")
    for L in (5.0, 10.0, 50.0):
        ref = _free_kernel_closed(A, B, L)
        cd = kernel_matrix(free(), g, L, cfg)
        quad, _ = kernel_quadrature_matrix(free(), g, L, cfg)
        for name, val in (("kernel-cd", cd), ("kernel-quadrature", quad)):
            rel = np.abs(val - ref) / np.abs(ref)
            k = np.unravel_index(np.argmax(rel), rel.shape)
            rows.append(CheckRow(f"{name} L={L:g}", float(val[k]), float(ref[k]), float(rel[k]), 1e-8))
        eq = np.max(np.abs(cd - quad) / (1 + np.abs(quad)))
        rows.append(CheckRow(f"method-equivalence L={L:g}", float(eq), 0.0, float(eq), 1e-8))

    bs = find_bands(free(np.pi), 4.5)
    from .floquet import density_of_states

    rho1 = density_of_states(bs, 1.0 + 1e-3)
    expect = 1.0 / (2 * np.pi * math.sqrt(1.0 + 1e-3))
    rows.append(CheckRow("density xi=1.001", rho1, expect, abs(rho1 - expect), 1e-6))

    rep = convergence_table(free(), 1.0, offset_grid(), [1e2, 1e3, 1e4], cfg)
    for L in rep.L_list:
        rows.append(CheckRow(f"universality sup-error L={L:g}", rep.sup_error[L], 0.0, rep.sup_error[L],
                             5e-3 if L >= 1e3 else math.inf))
    dec = 0.0 if rep.strictly_decreasing() else 1.0
    rows.append(CheckRow("universality decreasing", dec, 0.0, dec, 0.0))
    lim = free_limit(1.0, 1.0, 0.0)
    rows.append(CheckRow("universality limit a=1 b=0", lim, 2 * math.sin(0.5), abs(lim - 2 * math.sin(0.5)), 1e-15))

    clk = clock_experiment(free(), 1e3, 1.0, 5, "dirichlet", cfg)
    i0 = clk.indices.index(0)
    spacing = clk.zeros[i0 + 1] - clk.zeros[i0]
    expected = 2 * np.pi * math.sqrt(1.0) / 1e3
    rows.append(CheckRow("clock spacing 1/(L rho)", spacing, expected, abs(spacing / expected - 1), 1e-2))
    alt = 1.0 / (2 * 1e3 * math.sqrt(1.0))
    rows.append(CheckRow("clock spacing 1/(2 L sqrt(xi)) [reported only]", spacing, alt,
                         abs(spacing / alt - 1), math.inf))

    c_w = pin_weight_constant(1.0, 10.0, 400.0, cfg=cfg)
    res = reproduce_check(SpectralWeightModel(c_w), 1.0, 2.0, 10.0, 400.0, cfg)
    rows.append(CheckRow("reproducing residual", res.integral, res.target, res.residual, 5e-2))
    rows.append(CheckRow("weight constant c_w [reported only]", c_w, 1 / np.pi, abs(c_w * np.pi - 1), math.inf))
    return rows


def _run_free_check(cfg, out: Path) -> Outcome:
    rows = free_check(cfg.integrator)
    table = [(r.check, r.measured, r.expected, r.residual, r.tolerance, r.passed) for r in rows]
    f = write_table(out / "freecheck.csv", cfg,
                    ("check", "measured", "expected", "residual", "tolerance", "passed"), table)
    failed = [r.check for r in rows if not r.passed]
    return Outcome((f,), not failed, "failed: " + "; ".join(failed) if failed else "")


RUNNERS = {
    "bands": _run_bands,
    "dos": _run_dos,
    "kernel": _run_kernel,
    "universality": _run_universality,
    "clock": _run_clock,
    "regularity": _run_regularity,
    "free-check": _run_free_check,
}


def run(cfg: ExperimentConfig, out_dir: str | None = None) -> Outcome:
    """Execute one experiment and write its files into ``out_dir``."""
    out = Path(out_dir if out_dir is not None else cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg = _shifted(cfg)
    try:
        return RUNNERS[cfg.kind](cfg, out)
    except (HalflineError, ArithmeticError, ValueError) as exc:
        params = ", ".join(f"{k}={v}" for k, v in sorted(cfg.params.items()))
        raise HalflineError(f"{cfg.kind} failed ({params}): {exc}") from exc


# ---------------------------------------------------------------- entry point


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="halfline", description="Half-line Schroedinger kernel experiments.")
    ap.add_argument("--version", action="version", version=f"halfline {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for kind in KINDS:
        sp = sub.add_parser(kind, help=f"run the {kind} experiment")
        sp.add_argument("--config", required=(kind != "free-check"), help="INI experiment config")
        sp.add_argument("--out", help="output directory (default: [output] directory or .)")
    sp = sub.add_parser("run", help="run the experiment named in the config")
    sp.add_argument("config", help="INI experiment config")
    sp.add_argument("--out", help="output directory")
    return ap


def main(argv=None) -> int:
    ap = _parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_ERROR
    try:
        thread_count()
        if args.command == "run":
            cfg = load_config(args.config)
        elif args.config is None:
            cfg = parse_config("[experiment]\nkind = free-check\n")
        else:
            cfg = load_config(args.config, args.command)
        outcome = run(cfg, args.out)
    except (HalflineError, ValueError, ArithmeticError) as exc:
        print(f"halfline: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except OSError as exc:
        print(f"halfline: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    for f in outcome.files:
        print(f)
    if not outcome.passed:
        print(f"halfline: check failed: {outcome.message}", file=sys.stderr)
        return EXIT_CHECK_FAILED
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
