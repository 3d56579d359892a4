"""Physical ingredients of the collisional breakage problem.

Defines the geometric volume grid, the collision kernels mu(n, eps), the
power-family breakage distributions alpha(n, eps), the initial number
densities, and the six preset problem configurations used throughout the
package.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

_GEOMETRIC_RTOL = 1e-12
_MASS_RTOL = 1e-12


def _as_positive(x, name: str):
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0.0) or not np.all(np.isfinite(x)):
        raise ValueError(f"{name} must be positive and finite")
    return x


# ---------------------------------------------------------------------------
# volume grid


@dataclass(frozen=True)
class VolumeGrid:
    """Geometric partition of the truncated volume domain [n_min, n_max].

    Edges form a geometric progression; ``centers`` are the geometric
    midpoints sqrt(e_i * e_{i+1}) and double as the finite-volume pivots.
    """

    n_min: float
    n_max: float
    cell_count: int
    edges: np.ndarray = field(repr=False)
    centers: np.ndarray = field(repr=False)
    widths: np.ndarray = field(repr=False)

    def __post_init__(self):
        e = self.edges
        if self.cell_count < 2:
            raise ValueError("cell_count must be at least 2")
        if not (0.0 < self.n_min < self.n_max):
            raise ValueError("need 0 < n_min < n_max")
        if e.shape != (self.cell_count + 1,) or np.any(np.diff(e) <= 0.0):
            raise ValueError("edges must be strictly increasing with cell_count+1 entries")
        if not (math.isclose(e[0], self.n_min) and math.isclose(e[-1], self.n_max)):
            raise ValueError("edges must span [n_min, n_max]")
        ratios = e[1:] / e[:-1]
        if np.max(np.abs(ratios / ratios[0] - 1.0)) > 64 * _GEOMETRIC_RTOL:
            raise ValueError("edges must form a geometric progression")
        if np.any(self.centers <= e[:-1]) or np.any(self.centers >= e[1:]):
            raise ValueError("centers must lie strictly inside their cells")
        for arr in (self.edges, self.centers, self.widths):
            arr.flags.writeable = False

    @property
    def ratio(self) -> float:
        return float(self.edges[1] / self.edges[0])


def build_grid(n_min: float, n_max: float, cell_count: int) -> VolumeGrid:
    """Construct a geometric grid with ``cell_count`` cells on [n_min, n_max]."""
    if not (0.0 < n_min < n_max):
        raise ValueError("need 0 < n_min < n_max")
    if cell_count < 2:
        raise ValueError("cell_count must be at least 2")
    edges = np.geomspace(n_min, n_max, cell_count + 1)
    edges[0], edges[-1] = n_min, n_max
    centers = np.sqrt(edges[:-1] * edges[1:])
    widths = np.diff(edges)
    return VolumeGrid(float(n_min), float(n_max), int(cell_count), edges, centers, widths)


# ---------------------------------------------------------------------------
# collision kernels


class CollisionKernel:
    """Symmetric collision rate mu(n, eps).

    Both concrete variants factor as mu(n, eps) = g(n) * g(eps); the solvers
    exploit this through :meth:`separable_factor`.
    """

    def eval(self, n, eps):
        raise NotImplementedError

    def separable_factor(self, n):
        raise NotImplementedError

    def describe(self) -> str:
        raise NotImplementedError


@dataclass(frozen=True)
class ProductKernel(CollisionKernel):
    """mu(n, eps) = scale * n * eps."""

    scale: float = 1.0

    def __post_init__(self):
        if not (self.scale > 0.0 and math.isfinite(self.scale)):
            raise ValueError("scale must be positive")

    def eval(self, n, eps):
        n = _as_positive(n, "n")
        eps = _as_positive(eps, "eps")
        return self.scale * (n * eps)  # grouped so eval(n, eps) == eval(eps, n) exactly

    def separable_factor(self, n):
        return math.sqrt(self.scale) * np.asarray(n, dtype=float)

    def describe(self) -> str:
        if self.scale == 1.0:
            return "product n*eps"
        return f"product n*eps * {self.scale:g}"


@dataclass(frozen=True)
class PolymerizationKernel(CollisionKernel):
    """mu(n, eps) = (n + a)^(1/3) * (eps + a)^(1/3)."""

    a: float = 0.0

    def __post_init__(self):
        if not (self.a >= 0.0 and math.isfinite(self.a)):
            raise ValueError("a must be nonnegative")

    def eval(self, n, eps):
        n = _as_positive(n, "n")
        eps = _as_positive(eps, "eps")
        return np.cbrt(n + self.a) * np.cbrt(eps + self.a)

    def separable_factor(self, n):
        return np.cbrt(np.asarray(n, dtype=float) + self.a)

    def describe(self) -> str:
        return f"polymerization (n+a)^(1/3)(eps+a)^(1/3), a={self.a:g}"


# ---------------------------------------------------------------------------
# breakage distributions


@dataclass(frozen=True)
class PowerBreakage:
    """Breakage distribution alpha(n, eps) = sigma * n^(j-1) / eps^j.

    The constructor only admits mass-conserving members, i.e. those with
    sigma / (j + 1) = 1 so that the daughter mass per event equals the
    mother volume exactly.
    """

    sigma: float
    j: float

    def __post_init__(self):
        if not (self.sigma > 0.0 and self.j > 0.0):
            raise ValueError("sigma and j must be positive")
        if abs(self.sigma / (self.j + 1.0) - 1.0) > _MASS_RTOL:
            raise ValueError("mass conservation requires sigma = j + 1")

    def eval(self, n, eps):
        """Daughter density at volume ``n`` from a mother of volume ``eps``.

        Zero outside the support 0 < n <= eps.
        """
        eps = _as_positive(eps, "eps")
        n = np.asarray(n, dtype=float)
        if np.any(n <= 0.0):
            raise ValueError("n must be positive")
        val = self.sigma * n ** (self.j - 1.0) / eps**self.j
        return np.where(n <= eps, val, 0.0)

    def daughter_count(self) -> float:
        """Expected fragments per breakage event: integral of alpha over (0, eps]."""
        return self.sigma / self.j

    def number_integral(self, lo, hi, eps):
        """Exact integral of alpha(n, eps) dn over [lo, hi] clipped to [0, eps]."""
        lo = np.minimum(np.asarray(lo, dtype=float), eps)
        hi = np.minimum(np.asarray(hi, dtype=float), eps)
        return self.sigma / (eps**self.j * self.j) * (hi**self.j - lo**self.j)

    def mass_integral(self, lo, hi, eps):
        """Exact integral of n * alpha(n, eps) dn over [lo, hi] clipped to [0, eps]."""
        lo = np.minimum(np.asarray(lo, dtype=float), eps)
        hi = np.minimum(np.asarray(hi, dtype=float), eps)
        jp1 = self.j + 1.0
        return self.sigma / (eps**self.j * jp1) * (hi**jp1 - lo**jp1)

    def describe(self) -> str:
        if (self.sigma, self.j) == (2.0, 1.0):
            name = "binary"
        elif (self.sigma, self.j) == (1.5, 0.5):
            name = "ternary"
        else:
            name = f"power sigma={self.sigma:g} j={self.j:g}"
        return f"{name} ({self.daughter_count():g} daughters)"


def binary_breakage() -> PowerBreakage:
    """Two equal-chance daughters: alpha = 2 / eps."""
    return PowerBreakage(2.0, 1.0)


def ternary_breakage() -> PowerBreakage:
    """Three daughters: alpha = 3 / (2 sqrt(eps) sqrt(n))."""
    return PowerBreakage(1.5, 0.5)


# ---------------------------------------------------------------------------
# initial conditions


_IC_FORMS = {
    "exponential": (lambda n: np.exp(-n), "exp(-n)"),
    "gaussian": (lambda n: np.exp(-0.5 * n * n) / math.sqrt(2.0 * math.pi), "exp(-n^2/2)/sqrt(2 pi)"),
    "squared_exponential": (lambda n: n * n * np.exp(-n), "n^2 exp(-n)"),
}


@dataclass(frozen=True)
class InitialCondition:
    """Initial number density w(n, 0); strictly positive on (0, inf)."""

    kind: str

    def __post_init__(self):
        if self.kind not in _IC_FORMS:
            raise ValueError(f"unknown initial condition {self.kind!r}")

    def eval(self, n):
        n = np.asarray(n, dtype=float)
        return _IC_FORMS[self.kind][0](n)

    def describe(self) -> str:
        return f"{self.kind} {_IC_FORMS[self.kind][1]}"


# ---------------------------------------------------------------------------
# preset cases


@dataclass(frozen=True)
class CasePreset:
    """One of the six built-in problem configurations."""

    case_id: int
    kernel: CollisionKernel
    breakage: PowerBreakage
    ic: InitialCondition
    eval_times: tuple
    series_order: int
    grid_defaults: tuple  # (n_min, n_max, cell_count)
    has_exact_solution: bool = False

    def default_grid(self) -> VolumeGrid:
        return build_grid(*self.grid_defaults)


# Grid floors are chosen so that the daughter mass lost below n_min stays
# under 1e-6 of the initial mass: the per-event leak scales like n_min^(j+1),
# which forces a lower floor for the j = 1/2 (ternary) presets.
_PRESETS = {
    1: CasePreset(1, ProductKernel(1.0), binary_breakage(), InitialCondition("exponential"),
                  (0.3, 0.6, 0.9, 1.2, 1.5), 5, (1e-4, 50.0, 256), has_exact_solution=True),
    2: CasePreset(2, ProductKernel(1.0), binary_breakage(), InitialCondition("gaussian"),
                  (0.25, 0.5, 1.0), 5, (1e-4, 12.0, 256)),
    3: CasePreset(3, PolymerizationKernel(0.0), binary_breakage(), InitialCondition("exponential"),
                  (0.25, 0.5, 1.0), 3, (1e-4, 50.0, 256)),
    4: CasePreset(4, ProductKernel(1.0), ternary_breakage(), InitialCondition("exponential"),
                  (0.25, 0.5, 1.0), 5, (1e-5, 50.0, 256)),
    5: CasePreset(5, ProductKernel(1.0), ternary_breakage(), InitialCondition("gaussian"),
                  (0.25, 0.5, 1.0), 5, (1e-5, 12.0, 256)),
    6: CasePreset(6, ProductKernel(0.05), ternary_breakage(), InitialCondition("squared_exponential"),
                  (0.25, 0.5, 1.0), 4, (1e-5, 50.0, 256)),
}


def case_preset(case_id: int) -> CasePreset:
    """Return the preset configuration for ``case_id`` in 1..6."""
    try:
        return _PRESETS[int(case_id)]
    except (KeyError, ValueError):
        raise ValueError(f"case_id must be one of 1..6, got {case_id!r}") from None


def all_presets():
    return [_PRESETS[i] for i in sorted(_PRESETS)]
