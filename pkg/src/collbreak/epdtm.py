"""Series-in-time solver for the collisional breakage equation.

The solution is expanded as w(n, tau) = sum_k c_k(n) * tau^k.  Each iterate
of the integral recursion maps a time monomial to a time monomial, so the
Elzaki-transform step reduces exactly to dividing by the new order:

    c_{k+1}(n) = (birth_k(n) - death_k(n)) / (k + 1)

    birth_k(n) = int_0^inf int_n^inf mu(eps, rho) alpha(n, eps)
                 sum_r c_r(eps) c_{k-r}(rho) deps drho
    death_k(n) = int_0^inf mu(n, eps) sum_r c_r(n) c_{k-r}(eps) deps

All collision kernels here factor as mu(eps, rho) = g(eps) g(rho), and the
power-family alpha separates as sigma n^(j-1) eps^(-j), so the double birth
integral factorises into one upper-tail integral (weight g * eps^(-j)) and
one full-domain integral (weight g) per convolution pair.  A full 2-D panel
product (:func:`birth_integral_tensor`) is kept as a non-separable
validation path.

Coefficients are carried at the Gauss-Legendre panel nodes (quadrature
grade) plus the cell centers (public representation).  Upper tails from an
interior point use the cell's own nodal polynomial for the partial panel.
"""
from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import NumericsError
from .model import CasePreset, VolumeGrid
from .quadrature import DEFAULT_SPEC, PanelRule, QuadratureSpec


@dataclass(frozen=True)
class SeriesTerm:
    """Coefficient of tau^order, sampled on the grid.

    ``coeff`` holds the cell-center values; ``node_values`` the panel-node
    samples used by the quadrature (None for detached terms).
    """

    order: int
    coeff: np.ndarray
    node_values: np.ndarray | None = None


class _Workspace:
    """Grid- and problem-dependent arrays shared by every order."""

    def __init__(self, grid: VolumeGrid, preset: CasePreset, spec: QuadratureSpec):
        rule = PanelRule(grid, spec)
        G, p = grid.cell_count, spec.points_per_cell
        self.rule = rule
        self.n_nodes = G * p

        # evaluation points: all panel nodes, then all cell centers
        self.eval_x = np.concatenate([rule.nodes.ravel(), grid.centers])
        self.eval_cell = np.concatenate([np.repeat(np.arange(G), p), np.arange(G)])

        lo = grid.edges[:-1][self.eval_cell]
        dx = grid.widths[self.eval_cell]
        frac = (self.eval_x - lo) / dx

        # fresh GL sub-panel on [x, upper edge] of the containing cell
        u_sub = frac[:, None] + (1.0 - frac)[:, None] * rule.unit_nodes[None, :]
        self.sub_x = lo[:, None] + u_sub * dx[:, None]
        self.sub_w = (1.0 - frac)[:, None] * dx[:, None] * rule.unit_weights[None, :]

        # Lagrange evaluation tensor: cell-node values -> sub-panel values
        u = rule.unit_nodes
        bary = 1.0 / np.array([np.prod(u[s] - np.delete(u, s)) for s in range(p)])
        diff = u_sub[:, :, None] - u[None, None, :]
        with np.errstate(divide="ignore", invalid="ignore"):
            lagr = np.prod(diff, axis=2, keepdims=True) * bary[None, None, :] / diff
        hit = diff == 0.0
        if np.any(hit):
            rows = np.any(hit, axis=2)
            lagr[rows] = 0.0
            lagr[hit] = 1.0
        self.lagr = lagr

        g = preset.kernel.separable_factor
        jpow = preset.breakage.j
        self.g_nodes = g(rule.nodes)
        self.g_eval = g(self.eval_x)
        self.tail_weight_nodes = self.g_nodes * rule.nodes ** (-jpow)
        self.tail_weight_sub = g(self.sub_x) * self.sub_x ** (-jpow)
        self.birth_pref = preset.breakage.sigma * self.eval_x ** (jpow - 1.0)
        self.panel_w = rule.weights


def _order_caches(ws: _Workspace, samples: np.ndarray):
    """Tail integrals at every evaluation point and the g-weighted integral."""
    G, p = ws.rule.nodes.shape
    node_vals = samples[: ws.n_nodes].reshape(G, p)
    phi = ws.tail_weight_nodes * node_vals
    cell_int = np.sum(ws.panel_w * phi, axis=1)
    # suffix sums accumulate from the top cell down (small to large, fixed order)
    suffix = np.concatenate([np.cumsum(cell_int[::-1])[::-1], [0.0]])
    sub_vals = np.einsum("mqs,ms->mq", ws.lagr, node_vals[ws.eval_cell])
    partial = np.sum(ws.sub_w * ws.tail_weight_sub * sub_vals, axis=1)
    tails = partial + suffix[ws.eval_cell + 1]
    g_integral = float(np.sum(ws.panel_w * ws.g_nodes * node_vals))
    return tails, g_integral


def _birth_death(ws: _Workspace, samples, tails, g_ints, k: int, threads: int = 1):
    """Birth/death integrals for order k at every evaluation point."""
    mw = np.array([g_ints[k - r] for r in range(k + 1)])
    T = np.stack(tails[: k + 1])
    S = np.stack(samples[: k + 1])
    M = T.shape[1]
    birth = np.empty(M)
    death = np.empty(M)

    def fill(sl):
        # overflow surfaces as an explicit NumericsError on the finiteness check
        with np.errstate(over="ignore", invalid="ignore"):
            birth[sl] = ws.birth_pref[sl] * (mw @ T[:, sl])
            death[sl] = ws.g_eval[sl] * (mw @ S[:, sl])

    if threads <= 1:
        fill(slice(None))
    else:
        bounds = np.linspace(0, M, threads + 1, dtype=int)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(fill, [slice(a, b) for a, b in zip(bounds[:-1], bounds[1:])]))
    return birth, death


class SeriesSolution:
    """Truncated series solution holding orders 0..max_order on one grid."""

    def __init__(self, grid, preset, spec, ws, samples, tails, g_ints, seconds):
        self.grid = grid
        self.preset = preset
        self.spec = spec
        self._ws = ws
        self._samples = samples
        self._tails = tails
        self._g_ints = g_ints
        self.build_seconds = tuple(seconds)
        G, p = grid.cell_count, spec.points_per_cell
        terms = []
        for order, s in enumerate(samples):
            s.flags.writeable = False
            terms.append(SeriesTerm(order, s[G * p:], s[: G * p].reshape(G, p)))
        self.terms = tuple(terms)

    @property
    def max_order(self) -> int:
        return len(self._samples) - 1

    def extended(self, threads: int = 1) -> "SeriesSolution":
        """Return a new solution with one more series order appended."""
        k = self.max_order
        t0 = time.perf_counter()
        birth, death = _birth_death(self._ws, self._samples, self._tails, self._g_ints, k, threads)
        with np.errstate(invalid="ignore"):
            new = (birth - death) / (k + 1.0)
        if not np.all(np.isfinite(new)):
            m = int(np.argwhere(~np.isfinite(new))[0][0])
            where = f"node {m}" if m < self._ws.n_nodes else f"center {m - self._ws.n_nodes}"
            raise NumericsError(f"non-finite coefficient at order {k + 1}, grid {where}")
        tail_new, g_int_new = _order_caches(self._ws, new)
        dt = time.perf_counter() - t0
        return SeriesSolution(
            self.grid, self.preset, self.spec, self._ws,
            self._samples + [new], self._tails + [tail_new], self._g_ints + [g_int_new],
            self.build_seconds + (self.build_seconds[-1] + dt,),
        )


def build_series(preset: CasePreset, grid: VolumeGrid | None = None, order: int | None = None,
                 spec: QuadratureSpec = DEFAULT_SPEC, threads: int = 1, initial=None) -> SeriesSolution:
    """Compute the series solution for ``preset`` up to ``order``.

    ``initial`` optionally overrides the preset's initial density (callable
    of n); the default samples the preset initial condition exactly.
    """
    if grid is None:
        grid = preset.default_grid()
    if order is None:
        order = preset.series_order
    if order < 0:
        raise ValueError("order must be nonnegative")
    t0 = time.perf_counter()
    ws = _Workspace(grid, preset, spec)
    ic = initial if initial is not None else preset.ic.eval
    c0 = np.asarray(ic(ws.eval_x), dtype=float)
    if c0.shape != ws.eval_x.shape or not np.all(np.isfinite(c0)):
        raise ValueError("initial density must be finite on the grid")
    tails0, g_int0 = _order_caches(ws, c0)
    sol = SeriesSolution(grid, preset, spec, ws, [c0], [tails0], [g_int0],
                         (time.perf_counter() - t0,))
    for _ in range(order):
        sol = sol.extended(threads)
    return sol


def compute_next_term(sol: SeriesSolution, threads: int = 1) -> SeriesSolution:
    """Append the next series order; returns the extended solution."""
    return sol.extended(threads)


def elzaki_time_integrate(g_values, k: int) -> SeriesTerm:
    """Map the order-k source g(n) * tau^k to the order-(k+1) series term.

    The transform pair acts on time monomials as tau^k -> tau^(k+1)/(k+1),
    so the returned coefficient is g / (k + 1).
    """
    if k < 0:
        raise ValueError("k must be nonnegative")
    g_values = np.asarray(g_values, dtype=float)
    return SeriesTerm(k + 1, g_values / (k + 1.0))


def _require_orders(sol: SeriesSolution, k: int):
    if k < 0 or k > sol.max_order:
        raise ValueError(f"series holds orders 0..{sol.max_order}, need order {k}")


def birth_integral(sol: SeriesSolution, k: int, n_index: int) -> float:
    """Order-k birth integral at grid center ``n_index``."""
    _require_orders(sol, k)
    birth, _ = _birth_death(sol._ws, sol._samples, sol._tails, sol._g_ints, k)
    return float(birth[sol._ws.n_nodes + n_index])


def death_integral(sol: SeriesSolution, k: int, n_index: int) -> float:
    """Order-k death integral at grid center ``n_index``."""
    _require_orders(sol, k)
    _, death = _birth_death(sol._ws, sol._samples, sol._tails, sol._g_ints, k)
    return float(death[sol._ws.n_nodes + n_index])


def _interp_centers(sol: SeriesSolution, values: np.ndarray, n):
    # linear interpolation in log-volume between cell centers, clamped at the ends
    return np.interp(np.log(n), np.log(sol.grid.centers), values)


def nonlinear_convolution(sol: SeriesSolution, k: int, x_index: int, y: float) -> float:
    """Convolution sum_r c_r(x) c_{k-r}(y) with x a center index, y a volume.

    Symmetric pairs (r, k-r) are formed once; the middle term appears once
    for even k.
    """
    _require_orders(sol, k)
    cx = [t.coeff[x_index] for t in sol.terms[: k + 1]]
    cy = [float(_interp_centers(sol, t.coeff, y)) for t in sol.terms[: k + 1]]
    total = 0.0
    for r in range(k // 2 + 1):
        s = k - r
        if r == s:
            total += cx[r] * cy[r]
        else:
            total += cx[r] * cy[s] + cx[s] * cy[r]
    return total


def evaluate_series(sol: SeriesSolution, order: int, n, tau):
    """Evaluate the truncated series zeta_order(n, tau).

    ``n`` may be a scalar or array inside the grid; values between centers
    are interpolated linearly in log-volume.
    """
    _require_orders(sol, order)
    n = np.asarray(n, dtype=float)
    if np.any(n < sol.grid.n_min) or np.any(n > sol.grid.n_max):
        raise ValueError("n outside the grid domain")
    coeffs = [_interp_centers(sol, sol.terms[i].coeff, n) for i in range(order + 1)]
    result = coeffs[order]
    for i in range(order - 1, -1, -1):
        result = result * tau + coeffs[i]
    return result if result.ndim else float(result)


def birth_integral_tensor(sol: SeriesSolution, k: int, n_index: int) -> float:
    """Order-k birth integral via the full 2-D panel product.

    Does not use the g(eps) g(rho) factorisation; intended as a validation
    path on modest grids (cost grows with the square of the node count).
    """
    _require_orders(sol, k)
    ws = sol._ws
    grid = sol.grid
    nodes = ws.rule.nodes.ravel()
    w_flat = ws.panel_w.ravel()
    mu = sol.preset.kernel.eval(nodes[:, None], nodes[None, :])
    inner = []  # rho-integral of mu(eps, rho) c_s(rho) as a function of eps (at nodes)
    for s in range(k + 1):
        inner.append(mu @ (w_flat * sol._samples[s][: ws.n_nodes]))

    m = ws.n_nodes + n_index  # evaluation slot of this center
    xc = ws.eval_x[m]
    jpow = sol.preset.breakage.j
    sigma = sol.preset.breakage.sigma
    alpha_nodes = sigma * xc ** (jpow - 1.0) * nodes ** (-jpow)
    alpha_sub = sigma * xc ** (jpow - 1.0) * ws.sub_x[m] ** (-jpow)

    G, p = ws.rule.nodes.shape
    above = slice((n_index + 1) * p, G * p)
    total = 0.0
    for r in range(k + 1):
        c_r = sol._samples[r][: ws.n_nodes]
        inner_s = inner[k - r]
        full = float(np.sum(w_flat[above] * alpha_nodes[above] * c_r[above] * inner_s[above]))
        # partial panel [xc, upper edge] via the cell's nodal polynomial
        cell_vals = c_r.reshape(G, p)[n_index]
        inner_cell = inner_s.reshape(G, p)[n_index]
        c_sub = ws.lagr[m] @ cell_vals
        inner_sub = ws.lagr[m] @ inner_cell
        partial = float(np.sum(ws.sub_w[m] * alpha_sub * c_sub * inner_sub))
        total += full + partial
    return total


def exact_solution_case1(n, tau):
    """Closed-form density for preset case 1: (tau+1)^2 exp(-(tau+1) n)."""
    n = np.asarray(n, dtype=float)
    tau = np.asarray(tau, dtype=float)
    if np.any(n <= 0.0):
        raise ValueError("n must be positive")
    if np.any(tau < 0.0):
        raise ValueError("tau must be nonnegative")
    out = (tau + 1.0) ** 2 * np.exp(-(tau + 1.0) * n)
    return out if out.ndim else float(out)


def series_coefficient_case1(n, k: int):
    """Closed-form tau^k coefficient of the case-1 series.

    c_k(n) = ((-1)^k / k!) e^{-n} (n^k - 2k n^{k-1} + k(k-1) n^{k-2}).
    """
    if k < 0:
        raise ValueError("k must be nonnegative")
    n = np.asarray(n, dtype=float)
    if np.any(n <= 0.0):
        raise ValueError("n must be positive")
    poly = n**k
    if k >= 1:
        poly = poly - 2.0 * k * n ** (k - 1)
    if k >= 2:
        poly = poly + k * (k - 1.0) * n ** (k - 2)
    out = (-1.0) ** k / math.factorial(k) * np.exp(-n) * poly
    return out if out.ndim else float(out)
