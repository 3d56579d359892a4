"""Composite Gauss-Legendre quadrature on geometric volume grids.

Integrals over the truncated domain are panel sums over the grid cells.
Upper-tail integrals split the cell containing the lower limit so the limit
falls on a panel boundary.  Integrable power weights n^p with -1 < p <= 0
are handled either in closed form (:func:`integrate_singular_weight`) or by
the power-weight substitution t = n^(p+1)/(p+1), which turns the weighted
panel integral into a smooth one.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericsError
from .model import VolumeGrid


@dataclass(frozen=True)
class QuadratureSpec:
    """Panel rule configuration.

    ``singular_power`` declares a known n^p factor of callable integrands;
    0 disables the substitution.
    """

    points_per_cell: int = 4
    singular_power: float = 0.0

    def __post_init__(self):
        if self.points_per_cell < 2:
            raise ValueError("points_per_cell must be at least 2")
        if not (-1.0 < self.singular_power <= 0.0):
            raise ValueError("singular_power must lie in (-1, 0]")


DEFAULT_SPEC = QuadratureSpec()


class PanelRule:
    """Gauss-Legendre nodes and weights for every cell of a grid."""

    def __init__(self, grid: VolumeGrid, spec: QuadratureSpec = DEFAULT_SPEC):
        self.grid = grid
        self.spec = spec
        xi, wxi = np.polynomial.legendre.leggauss(spec.points_per_cell)
        self.unit_nodes = 0.5 * (xi + 1.0)    # GL nodes mapped to (0, 1)
        self.unit_weights = 0.5 * wxi
        lo = grid.edges[:-1][:, None]
        dx = grid.widths[:, None]
        self.nodes = lo + self.unit_nodes[None, :] * dx        # (G, p)
        self.weights = self.unit_weights[None, :] * dx         # (G, p)
        self.nodes.flags.writeable = False
        self.weights.flags.writeable = False

    @property
    def points_per_cell(self) -> int:
        return self.spec.points_per_cell

    def panel_sums(self, node_values: np.ndarray) -> np.ndarray:
        """Per-cell integrals from integrand values at the panel nodes."""
        vals = np.asarray(node_values, dtype=float).reshape(self.nodes.shape)
        return np.sum(self.weights * vals, axis=1)


def power_integral(p: float, lo, hi):
    """Closed-form integral of n^p dn over [lo, hi] for p > -1."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    q = p + 1.0
    return (hi**q - lo**q) / q


def integrate_singular_weight(p: float, lo: float, hi: float) -> float:
    """Exact panel weight for an integrable power singularity.

    Integral of n^p dn over [lo, hi] with -1 < p <= 0; used as the analytic
    building block wherever an n^p factor must be integrated from (or near) 0.
    """
    if not (-1.0 < p <= 0.0):
        raise ValueError("p must lie in (-1, 0] (p <= -1 is non-integrable)")
    if not (0.0 <= lo < hi):
        raise ValueError("need 0 <= lo < hi")
    return float(power_integral(p, lo, hi))


def _eval_integrand(f, x, where: str):
    vals = np.asarray(f(x), dtype=float)
    if not np.all(np.isfinite(vals)):
        bad = np.argwhere(~np.isfinite(vals))
        raise NumericsError(f"non-finite integrand value in {where}, first at node index {tuple(bad[0])}")
    return vals


def _substituted_panel(f, lo: float, hi: float, p: float, unit_nodes, unit_weights) -> float:
    # t = n^(p+1)/(p+1) absorbs a declared n^p factor of f exactly
    q = p + 1.0
    t_lo, t_hi = lo**q / q, hi**q / q
    t = t_lo + unit_nodes * (t_hi - t_lo)
    n = (q * t) ** (1.0 / q)
    vals = _eval_integrand(f, n, "substituted panel") * n ** (-p)
    return float(np.sum(unit_weights * vals) * (t_hi - t_lo))


def integrate_cells(f, grid: VolumeGrid, spec: QuadratureSpec = DEFAULT_SPEC, rule: PanelRule | None = None) -> float:
    """Integrate over the whole truncated domain.

    ``f`` may be a callable of n or an array of values at the panel nodes
    (shape (G, p) or flattened).  Panel sums are accumulated left to right
    so results are bit-stable.
    """
    if rule is None or rule.spec != spec:
        rule = PanelRule(grid, spec)
    if callable(f):
        if spec.singular_power != 0.0:
            per_cell = [
                _substituted_panel(f, grid.edges[i], grid.edges[i + 1], spec.singular_power,
                                   rule.unit_nodes, rule.unit_weights)
                for i in range(grid.cell_count)
            ]
            return float(np.sum(per_cell))
        vals = _eval_integrand(f, rule.nodes, "integrate_cells")
    else:
        vals = np.asarray(f, dtype=float).reshape(rule.nodes.shape)
        if not np.all(np.isfinite(vals)):
            bad = np.argwhere(~np.isfinite(vals))
            raise NumericsError(f"non-finite integrand value in cell {bad[0][0]}")
    return float(np.sum(rule.panel_sums(vals)))


def integrate_upper_tail(f, lo: float, grid: VolumeGrid, spec: QuadratureSpec = DEFAULT_SPEC,
                         rule: PanelRule | None = None) -> float:
    """Integrate a callable over [lo, n_max].

    ``lo`` below n_min is snapped up to n_min; the cell containing ``lo`` is
    split so the limit lands on a panel boundary.
    """
    if not callable(f):
        raise TypeError("integrate_upper_tail needs a callable integrand")
    if lo < 0.0 or lo > grid.n_max * (1.0 + 1e-12):
        raise ValueError(f"lower limit {lo} outside the grid domain")
    lo = min(max(lo, grid.n_min), grid.n_max)
    if rule is None or rule.spec != spec:
        rule = PanelRule(grid, spec)
    if lo >= grid.n_max:
        return 0.0
    i = min(int(np.searchsorted(grid.edges, lo, side="right") - 1), grid.cell_count - 1)
    hi_edge = grid.edges[i + 1]
    # partial panel [lo, hi_edge)
    width = hi_edge - lo
    total = 0.0
    if width > 0.0:
        x = lo + rule.unit_nodes * width
        total += float(np.sum(rule.unit_weights * _eval_integrand(f, x, "upper tail panel")) * width)
    if i + 1 < grid.cell_count:
        vals = _eval_integrand(f, rule.nodes[i + 1:], "integrate_upper_tail")
        total += float(np.sum(np.sum(rule.weights[i + 1:] * vals, axis=1)))
    return total
