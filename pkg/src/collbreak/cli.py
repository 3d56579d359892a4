"""Command-line front end: run preset or custom cases, write CSV tables.

Outputs per run: density.csv (series vs reference densities), moments.csv
(orders 0..2), error_vs_k.csv (probe-point error against series order with
wall time), diagnostics.csv (contraction constant and truncation bounds),
and manifest.json (config echo, grid, versions, timings).  Identical
configurations produce byte-identical CSVs.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import platform
import sys
import tempfile
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .analysis import (ContractionParams, NormParams, compute_moment, contraction_delta,
                       error_bound, series_moment, weighted_norm)
from .epdtm import build_series, evaluate_series, exact_solution_case1
from .errors import NumericsError
from .fvm import FvmConfig, fvm_run
from .model import (CasePreset, InitialCondition, PolymerizationKernel, PowerBreakage,
                    ProductKernel, all_presets, binary_breakage, build_grid, case_preset,
                    ternary_breakage)

_FMT = "{:.16e}"  # 17 significant digits, fixed layout
_SCHEMA_VERSION = "v1"


def _fmt(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return _FMT.format(float(value))


# ---------------------------------------------------------------------------
# configuration


@dataclass
class RunConfig:
    case: int = 1                      # 0 means custom kernel/breakage/ic
    kernel: str = ""
    breakage: str = ""
    ic: str = ""
    n_min: float | None = None         # None -> preset default
    n_max: float | None = None
    cells: int | None = None
    order: int | None = None
    times: tuple | None = None
    reference: str = "auto"            # auto | exact | fvm
    fvm_dt: float = 1e-3
    fvm_integrator: str = "rk2"
    fvm_safety: float = 0.9
    norm_c: float = 1.0
    norm_beta: float = 1.0
    tau0: float = 0.05
    horizon: float = 1.0
    probe_n: float | None = None
    probe_tau: float | None = None
    error_orders: tuple | None = None
    xi_max: int = 10
    threads: int = 1
    _resolved: dict = field(default_factory=dict, repr=False)

    def resolve(self):
        """Fill defaults from the preset and validate every numeric field."""
        if self.case:
            preset = case_preset(self.case)
        else:
            preset = CasePreset(0, _parse_kernel(self.kernel), _parse_breakage(self.breakage),
                                _parse_ic(self.ic), (0.25, 0.5, 1.0), 5, (1e-4, 50.0, 256))
        n_min = preset.grid_defaults[0] if self.n_min is None else self.n_min
        n_max = preset.grid_defaults[1] if self.n_max is None else self.n_max
        cells = preset.grid_defaults[2] if self.cells is None else self.cells
        order = preset.series_order if self.order is None else self.order
        times = preset.eval_times if self.times is None else tuple(self.times)
        probe_n = (6.0 if self.case == 1 else 1.0) if self.probe_n is None else self.probe_n
        probe_tau = (1.0 if self.case == 1 else 0.5) if self.probe_tau is None else self.probe_tau
        if self.error_orders is None:
            error_orders = (5, 10, 15, 20) if self.case == 1 else tuple(range(1, max(order, 1) + 1))
        else:
            error_orders = tuple(self.error_orders)
        reference = self.reference
        if reference == "auto":
            reference = "exact" if preset.has_exact_solution else "fvm"
        if reference == "exact" and not preset.has_exact_solution:
            raise ValueError("exact reference is only available for case 1")
        if reference not in ("exact", "fvm"):
            raise ValueError(f"unknown reference {reference!r}")

        if not (0.0 < n_min < n_max):
            raise ValueError("need 0 < n_min < n_max")
        if cells < 2:
            raise ValueError("cells must be at least 2")
        if order < 0:
            raise ValueError("order must be nonnegative")
        if not times or any(t < 0.0 for t in times) or any(
                b <= a for a, b in zip(times, times[1:])):
            raise ValueError("times must be nonnegative and strictly ascending")
        if not (self.fvm_dt > 0.0):
            raise ValueError("fvm_dt must be positive")
        if self.fvm_integrator not in ("euler", "rk2"):
            raise ValueError("fvm_integrator must be 'euler' or 'rk2'")
        if not (0.0 < self.fvm_safety <= 1.0):
            raise ValueError("fvm_safety must lie in (0, 1]")
        if not (self.norm_c > 0.0 and self.norm_beta > 0.0 and self.tau0 > 0.0 and self.horizon > 0.0):
            raise ValueError("norm_c, norm_beta, tau0 and horizon must be positive")
        if not (n_min <= probe_n <= n_max):
            raise ValueError("probe_n must lie inside the grid")
        if probe_tau < 0.0:
            raise ValueError("probe_tau must be nonnegative")
        if not error_orders or any(k < 0 for k in error_orders):
            raise ValueError("error_orders must be nonnegative")
        if self.xi_max < 1:
            raise ValueError("xi_max must be at least 1")
        if self.threads < 0:
            raise ValueError("threads must be nonnegative")

        self._resolved = {
            "preset": preset, "n_min": n_min, "n_max": n_max, "cells": cells,
            "order": order, "times": times, "reference": reference,
            "probe_n": probe_n, "probe_tau": probe_tau, "error_orders": error_orders,
        }
        return self

    def flat(self) -> dict:
        """Normalised key -> string echo; parsing it back reproduces the run."""
        r = self._resolved
        out = {
            "case": str(self.case),
            "n_min": repr(r["n_min"]), "n_max": repr(r["n_max"]), "cells": str(r["cells"]),
            "order": str(r["order"]),
            "times": ", ".join(repr(t) for t in r["times"]),
            "reference": r["reference"],
            "fvm_dt": repr(self.fvm_dt), "fvm_integrator": self.fvm_integrator,
            "fvm_safety": repr(self.fvm_safety),
            "norm_c": repr(self.norm_c), "norm_beta": repr(self.norm_beta),
            "tau0": repr(self.tau0), "horizon": repr(self.horizon),
            "probe_n": repr(r["probe_n"]), "probe_tau": repr(r["probe_tau"]),
            "error_orders": ", ".join(str(k) for k in r["error_orders"]),
            "xi_max": str(self.xi_max), "threads": str(self.threads),
        }
        if not self.case:
            out.update({"kernel": self.kernel, "breakage": self.breakage, "ic": self.ic})
        return out


def _parse_kernel(text: str):
    name, _, arg = text.partition(":")
    if name == "product":
        return ProductKernel(float(arg) if arg else 1.0)
    if name == "polymerization":
        return PolymerizationKernel(float(arg) if arg else 0.0)
    raise ValueError(f"unknown kernel {text!r}")


def _parse_breakage(text: str):
    if text == "binary":
        return binary_breakage()
    if text == "ternary":
        return ternary_breakage()
    name, _, arg = text.partition(":")
    if name == "power":
        sigma, j = (float(v) for v in arg.split(","))
        return PowerBreakage(sigma, j)
    raise ValueError(f"unknown breakage {text!r}")


def _parse_ic(text: str):
    return InitialCondition(text)


_FIELD_PARSERS = {
    "case": int, "kernel": str, "breakage": str, "ic": str,
    "n_min": float, "n_max": float, "cells": int, "order": int,
    "times": lambda s: tuple(float(v) for v in s.split(",") if v.strip()),
    "reference": str, "fvm_dt": float, "fvm_integrator": str, "fvm_safety": float,
    "norm_c": float, "norm_beta": float, "tau0": float, "horizon": float,
    "probe_n": float, "probe_tau": float,
    "error_orders": lambda s: tuple(int(v) for v in s.split(",") if v.strip()),
    "xi_max": int, "threads": int,
}


def load_config(path: str) -> RunConfig:
    """Parse a flat key = value configuration file."""
    cfg = RunConfig()
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = (part.strip() for part in line.partition("="))
            if not sep or key not in _FIELD_PARSERS:
                raise ValueError(f"{path}:{lineno}: bad config line {raw.strip()!r}")
            try:
                setattr(cfg, key, _FIELD_PARSERS[key](value))
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: cannot parse {key}: {exc}") from None
    return cfg.resolve()


# ---------------------------------------------------------------------------
# output writing


def _atomic_write(path: str, text: str):
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", text=True)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_csv(path: str, name: str, header, rows):
    lines = [f"# collbreak.{name}.{_SCHEMA_VERSION}", ",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) if not isinstance(v, str) else v for v in row))
    _atomic_write(path, "\n".join(lines) + "\n")


class _Stage:
    """Labels errors with the pipeline stage that raised them."""

    def __init__(self, name):
        self.name = name

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc is not None and not getattr(exc, "_staged", False):
            exc.args = (f"[{self.name}] {exc}",) + exc.args[1:]
            exc._staged = True
        return False


def run_case(config: RunConfig, out_dir: str, threads: int | None = None) -> dict:
    """Execute one configured run and write all output files into out_dir."""
    if not config._resolved:
        config.resolve()
    r = config._resolved
    preset, order, times = r["preset"], r["order"], r["times"]
    n_threads = config.threads if threads is None else threads
    if n_threads == 0:
        n_threads = os.cpu_count() or 1
    os.makedirs(out_dir, exist_ok=True)
    timings = {}
    warnings = []
    t_start = time.perf_counter()

    with _Stage("grid"):
        grid = build_grid(r["n_min"], r["n_max"], r["cells"])

    with _Stage("series"):
        t0 = time.perf_counter()
        k_build = max(order, max(r["error_orders"]))
        sol = build_series(preset, grid, k_build, threads=n_threads)
        timings["series_seconds"] = time.perf_counter() - t0

    fvm_states = {}
    if r["reference"] == "fvm":
        with _Stage("fvm"):
            t0 = time.perf_counter()
            snap = sorted(set(times) | {r["probe_tau"]})
            cfg = FvmConfig(grid, config.fvm_dt, max(snap), config.fvm_integrator, config.fvm_safety)
            for state in fvm_run(cfg, preset, snap):
                fvm_states[state.time] = state
            timings["fvm_seconds"] = time.perf_counter() - t0

    def reference_density(tau):
        if r["reference"] == "exact":
            return exact_solution_case1(grid.centers, tau)
        return fvm_states[tau].density

    def reference_at_probe():
        if r["reference"] == "exact":
            return exact_solution_case1(r["probe_n"], r["probe_tau"])
        dens = fvm_states[r["probe_tau"]].density
        return float(np.interp(np.log(r["probe_n"]), np.log(grid.centers), dens))

    def reference_moment(k, tau):
        if r["reference"] == "exact":
            return (tau + 1.0, 1.0, 2.0 / (tau + 1.0))[k]
        return compute_moment(fvm_states[tau].density, k, grid)

    paths = {}
    with _Stage("density table"):
        rows = []
        coeffs = [t.coeff for t in sol.terms[: order + 1]]
        for tau in times:
            dens = coeffs[order].copy()
            for i in range(order - 1, -1, -1):
                dens = dens * tau + coeffs[i]
            ref = reference_density(tau)
            for i, n in enumerate(grid.centers):
                rows.append((tau, n, dens[i], ref[i], abs(dens[i] - ref[i])))
        paths["density"] = os.path.join(out_dir, "density.csv")
        _write_csv(paths["density"], "density", ("tau", "n", "epdtm", "reference", "abs_error"), rows)

    with _Stage("moment table"):
        rows = []
        for tau in times:
            for k in (0, 1, 2):
                rows.append((tau, k, series_moment(sol, k, order, tau), reference_moment(k, tau)))
        paths["moments"] = os.path.join(out_dir, "moments.csv")
        _write_csv(paths["moments"], "moments", ("tau", "order", "epdtm", "reference"), rows)

    with _Stage("error table"):
        ref_probe = reference_at_probe()
        rows = []
        for k in r["error_orders"]:
            approx = evaluate_series(sol, k, r["probe_n"], r["probe_tau"])
            rows.append((k, abs(approx - ref_probe), sol.build_seconds[k]))
        paths["error_vs_k"] = os.path.join(out_dir, "error_vs_k.csv")
        _write_csv(paths["error_vs_k"], "error_vs_k", ("k", "error", "wall_time_seconds"), rows)

    with _Stage("diagnostics"):
        params = NormParams(config.norm_c, config.norm_beta, config.tau0)
        norm_w0 = weighted_norm(sol.terms[0].node_values, params, grid)
        norm_w0_mass = weighted_norm(sol.terms[0].node_values, NormParams(1.0, 1.0, config.tau0), grid)
        cp = ContractionParams(preset.breakage.sigma, config.norm_beta, config.tau0,
                               config.horizon, norm_w0, norm_w0_mass)
        diag = contraction_delta(cp)
        if not diag.contractive:
            warnings.append(f"delta = {diag.delta:.6g} >= 1: no certified contraction horizon")
        norm_w1 = config.tau0 * weighted_norm(sol.terms[1].node_values, params, grid) \
            if sol.max_order >= 1 else 0.0
        rows = []
        for xi in range(1, config.xi_max + 1):
            bound = error_bound(diag.delta, xi, norm_w1) if diag.contractive else math.inf
            rows.append((xi, diag.delta, diag.P, bound, int(diag.contractive)))
        paths["diagnostics"] = os.path.join(out_dir, "diagnostics.csv")
        _write_csv(paths["diagnostics"], "diagnostics",
                   ("xi", "delta", "P", "error_bound", "contractive"), rows)

    with _Stage("manifest"):
        manifest = {
            "schema": f"collbreak.manifest.{_SCHEMA_VERSION}",
            "config": config.flat(),
            "grid": {"n_min": grid.n_min, "n_max": grid.n_max, "cells": grid.cell_count,
                     "ratio": grid.ratio},
            "versions": {"collbreak": __version__, "numpy": np.__version__,
                         "scipy": __import__("scipy").__version__,
                         "python": platform.python_version()},
            "timings": {**timings, "total_seconds": time.perf_counter() - t_start},
            "warnings": warnings,
            "outputs": sorted(os.path.basename(p) for p in paths.values()),
        }
        paths["manifest"] = os.path.join(out_dir, "manifest.json")
        _atomic_write(paths["manifest"], json.dumps(manifest, indent=2, sort_keys=True) + "\n")

    return paths


def list_presets() -> str:
    """Human-readable table of the six built-in cases."""
    lines = ["case  collision kernel                              breakage              "
             "initial density                 exact solution"]
    for p in all_presets():
        lines.append(f"{p.case_id:<6}{p.kernel.describe():<46}{p.breakage.describe():<22}"
                     f"{p.ic.describe():<32}{'yes' if p.has_exact_solution else 'no'}")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# entry point


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="collbreak",
                                     description="Collisional breakage equation solver suite")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a preset or configured case")
    group = run.add_mutually_exclusive_group(required=True)
    group.add_argument("--case", type=int, help="preset case id (1..6) with defaults")
    group.add_argument("--config", help="path to a flat key = value configuration file")
    run.add_argument("--out", default="collbreak_output", help="output directory")
    run.add_argument("--threads", type=int, default=1, help="worker threads (0 = auto)")
    sub.add_parser("list", help="list the built-in cases")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "list":
        print(list_presets())
        return 0
    try:
        if args.config:
            config = load_config(args.config)
        else:
            config = RunConfig(case=args.case).resolve()
        config.threads = args.threads
    except (ValueError, OSError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    try:
        paths = run_case(config, args.out, threads=args.threads)
    except ValueError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except NumericsError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3
    print("\n".join(paths[k] for k in sorted(paths)))
    return 0


if __name__ == "__main__":
    sys.exit(main())
