"""Solvers and diagnostics for the nonlinear collisional breakage equation.

Two complementary solvers share one problem description: a series-in-time
expansion whose coefficients satisfy a birth/death integral recursion, and a
mass-conserving finite-volume reference scheme.  Integral moments, weighted
norms, and contraction diagnostics round out the toolkit; the ``collbreak``
command line runs the six built-in cases and writes CSV tables.
"""

__version__ = "0.1.0"

from .errors import NumericsError, StiffnessError
from .model import (CasePreset, CollisionKernel, InitialCondition, PolymerizationKernel,
                    PowerBreakage, ProductKernel, VolumeGrid, all_presets, binary_breakage,
                    build_grid, case_preset, ternary_breakage)
from .quadrature import (PanelRule, QuadratureSpec, integrate_cells, integrate_singular_weight,
                         integrate_upper_tail)
from .epdtm import (SeriesSolution, SeriesTerm, birth_integral, birth_integral_tensor,
                    build_series, compute_next_term, death_integral, elzaki_time_integrate,
                    evaluate_series, exact_solution_case1, nonlinear_convolution,
                    series_coefficient_case1)
from .fvm import FvmConfig, FvmOperator, FvmState, fvm_rates, fvm_run, fvm_step, initial_state
from .analysis import (ContractionDiagnostics, ContractionParams, MomentSeries, NormParams,
                       compute_moment, contraction_delta, error_bound, error_table,
                       fvm_moment_trajectory, series_moment, series_moment_trajectory,
                       weighted_norm)

__all__ = [name for name in dir() if not name.startswith("_")]
