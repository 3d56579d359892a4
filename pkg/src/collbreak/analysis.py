"""Integral moments, weighted norms, and convergence diagnostics.

The k-th moment of a density is N_k = integral of n^k w(n) dn over the
truncated domain.  The weighted norm used by the contraction diagnostics is

    ||w|| = sup_{tau in [0, tau0]} integral (c n)^beta |w(n, tau)| dn

realised as a max over the sampled trajectory.  The contraction constant

    delta = tau0^2 exp(2 tau0 P) [ ||w0|| + (4 sigma P / beta)(1 + tau0 P) ],
    P = ||w0|| + (sigma / beta) T ||w0||_1^2

certifies convergence of the series iteration on [0, tau0] when delta < 1,
with the a-priori truncation bound delta^xi ||w1|| / (1 - delta).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .model import VolumeGrid
from .quadrature import DEFAULT_SPEC, PanelRule, QuadratureSpec, integrate_cells


def _density_node_values(density, grid: VolumeGrid, spec: QuadratureSpec, rule: PanelRule | None = None):
    """Integrand samples at panel nodes, or None when given cell averages."""
    if callable(density):
        if rule is None:
            rule = PanelRule(grid, spec)
        return np.asarray(density(rule.nodes), dtype=float), rule
    density = np.asarray(density, dtype=float)
    if density.size == grid.cell_count:
        return None, rule  # cell-averaged representation
    if rule is None:
        rule = PanelRule(grid, spec)
    return density.reshape(rule.nodes.shape), rule


def compute_moment(density, k: int, grid: VolumeGrid, spec: QuadratureSpec = DEFAULT_SPEC,
                   singular_power: float = 0.0) -> float:
    """k-th order moment (k in 0..2) of a density on the truncated domain.

    ``density`` may be a callable of n, panel-node samples, or cell-averaged
    values (length cell_count; integrated midpoint-wise).  A declared
    ``singular_power`` p routes callables through the n^p substitution rule.
    """
    if k not in (0, 1, 2):
        raise ValueError("moment order k must be 0, 1 or 2")
    if callable(density) and singular_power != 0.0:
        sub_spec = QuadratureSpec(spec.points_per_cell, singular_power)
        return integrate_cells(lambda n: n**k * density(n), grid, sub_spec)
    vals, rule = _density_node_values(density, grid, spec)
    if vals is None:
        w = np.asarray(density, dtype=float)
        return float(np.sum(grid.centers**k * w * grid.widths))
    return float(np.sum(rule.panel_sums(rule.nodes**k * vals)))


def series_moment(sol, k: int, order: int, tau: float, spec: QuadratureSpec = DEFAULT_SPEC) -> float:
    """Moment N_k of the truncated series at time tau, using orders 0..order."""
    if order > sol.max_order:
        raise ValueError(f"series holds orders 0..{sol.max_order}")
    total = 0.0
    for i in range(order, -1, -1):
        total = total * tau + compute_moment(sol.terms[i].node_values, k, sol.grid, spec)
    return total


@dataclass(frozen=True)
class MomentSeries:
    """Trajectory of one integral moment: ascending (tau, N_k) samples."""

    order: int
    samples: tuple

    def __post_init__(self):
        taus = [t for t, _ in self.samples]
        if any(b <= a for a, b in zip(taus, taus[1:])):
            raise ValueError("moment sample times must be ascending")
        if not all(math.isfinite(v) for _, v in self.samples):
            raise ValueError("moment values must be finite")

    def values(self) -> np.ndarray:
        return np.array([v for _, v in self.samples])


def series_moment_trajectory(sol, k: int, order: int, times) -> MomentSeries:
    return MomentSeries(k, tuple((float(t), series_moment(sol, k, order, t)) for t in times))


def fvm_moment_trajectory(states, k: int, grid: VolumeGrid) -> MomentSeries:
    return MomentSeries(k, tuple((s.time, compute_moment(s.density, k, grid)) for s in states))


@dataclass(frozen=True)
class NormParams:
    """Weight parameters of the (c n)^beta norm on the horizon [0, tau0]."""

    c: float = 1.0
    beta: float = 1.0
    tau0: float = 1.0

    def __post_init__(self):
        if not (self.c > 0.0 and self.beta > 0.0):
            raise ValueError("c and beta must be positive")
        if not (self.tau0 > 0.0):
            raise ValueError("tau0 must be positive")


def weighted_norm(trajectory, params: NormParams, grid: VolumeGrid,
                  spec: QuadratureSpec = DEFAULT_SPEC) -> float:
    """Max over trajectory snapshots of integral (c n)^beta |w| dn.

    ``trajectory`` is a single density or a sequence of densities (callables,
    node samples, or cell averages).
    """
    if callable(trajectory) or isinstance(trajectory, np.ndarray):
        trajectory = [trajectory]
    else:
        trajectory = list(trajectory)
    if not trajectory:
        raise ValueError("trajectory must contain at least one snapshot")
    rule = PanelRule(grid, spec)
    best = -math.inf
    for snap in trajectory:
        vals, _ = _density_node_values(snap, grid, spec, rule)
        if vals is None:
            w = np.asarray(snap, dtype=float)
            val = float(np.sum((params.c * grid.centers) ** params.beta * np.abs(w) * grid.widths))
        else:
            val = float(np.sum(rule.panel_sums((params.c * rule.nodes) ** params.beta * np.abs(vals))))
        best = max(best, val)
    return best


@dataclass(frozen=True)
class ContractionParams:
    """Inputs of the contraction diagnostic.

    ``norm_w0`` is the weighted norm of the initial density, ``norm_w0_mass``
    its first-moment norm (the c = beta = 1 instance).
    """

    sigma: float
    beta: float
    tau0: float
    horizon: float
    norm_w0: float
    norm_w0_mass: float

    def __post_init__(self):
        if min(self.sigma, self.beta, self.tau0, self.horizon, self.norm_w0, self.norm_w0_mass) <= 0.0:
            raise ValueError("all contraction parameters must be positive")


class ContractionDiagnostics(NamedTuple):
    delta: float
    P: float
    big_delta: float      # delta / tau0
    contractive: bool     # delta < 1


def contraction_delta(params: ContractionParams) -> ContractionDiagnostics:
    """Contraction constant delta and companions for the given parameters."""
    P = params.norm_w0 + params.sigma / params.beta * params.horizon * params.norm_w0_mass**2
    delta = (params.tau0**2 * math.exp(2.0 * params.tau0 * P)
             * (params.norm_w0 + 4.0 * params.sigma * P / params.beta * (1.0 + params.tau0 * P)))
    return ContractionDiagnostics(delta, P, delta / params.tau0, delta < 1.0)


def error_bound(delta: float, xi: int, norm_w1: float) -> float:
    """A-priori truncation bound delta^xi ||w1|| / (1 - delta), for delta < 1."""
    if not (0.0 < delta < 1.0):
        raise ValueError("error bound requires 0 < delta < 1")
    if xi < 0:
        raise ValueError("xi must be nonnegative")
    if norm_w1 < 0.0:
        raise ValueError("norm_w1 must be nonnegative")
    return delta**xi * norm_w1 / (1.0 - delta)


def error_table(approx, exact, n: float, times):
    """Rows (tau, exact, approx, |difference|) at a fixed probe volume."""
    rows = []
    for t in times:
        e = float(exact(n, t))
        a = float(approx(n, t))
        rows.append((float(t), e, a, abs(a - e)))
    return rows
