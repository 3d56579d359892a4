import numpy as np
import pytest

import collbreak as cb
from collbreak.model import InitialCondition, PolymerizationKernel, PowerBreakage, ProductKernel


def geometric_panel_quad(f, lo, hi, panels=64, points=8):
    """Independent panel quadrature used as the oracle for the alpha integrals."""
    edges = np.geomspace(lo, hi, panels + 1)
    xi, wi = np.polynomial.legendre.leggauss(points)
    widths = np.diff(edges)
    x = edges[:-1][:, None] + 0.5 * (xi + 1.0)[None, :] * widths[:, None]
    w = 0.5 * wi[None, :] * widths[:, None]
    return float(np.sum(w * f(x)))


class TestGrid:
    def test_two_cell_example(self):
        g = cb.build_grid(1.0, 4.0, 2)
        np.testing.assert_allclose(g.edges, [1.0, 2.0, 4.0], rtol=1e-14)
        np.testing.assert_allclose(g.widths, [1.0, 2.0], rtol=1e-14)

    def test_ratio_from_bounds(self):
        g = cb.build_grid(1e-3, 1e3, 6)
        np.testing.assert_allclose(g.edges[1:] / g.edges[:-1], 10.0, rtol=1e-12)

    def test_inverted_bounds_rejected(self):
        with pytest.raises(ValueError):
            cb.build_grid(4.0, 1.0, 2)

    def test_too_few_cells_rejected(self):
        with pytest.raises(ValueError):
            cb.build_grid(1.0, 4.0, 1)

    def test_invariants(self):
        g = cb.build_grid(1e-4, 50.0, 173)
        assert np.all(np.diff(g.edges) > 0)
        ratios = g.edges[1:] / g.edges[:-1]
        assert np.max(np.abs(ratios / ratios[0] - 1.0)) < 1e-12
        np.testing.assert_allclose(g.widths, np.diff(g.edges), rtol=0, atol=0)
        assert np.all(g.centers > g.edges[:-1]) and np.all(g.centers < g.edges[1:])


class TestCollisionKernels:
    def test_product_example(self):
        assert ProductKernel(1.0).eval(2.0, 3.0) == pytest.approx(6.0, rel=1e-14)

    def test_polymerization_example(self):
        # cube roots of 8 and 27
        assert PolymerizationKernel(0.0).eval(8.0, 27.0) == pytest.approx(6.0, rel=1e-12)

    def test_scaled_product_example(self):
        assert ProductKernel(0.05).eval(2.0, 5.0) == pytest.approx(0.5, rel=1e-14)

    @pytest.mark.parametrize("kernel", [ProductKernel(1.0), ProductKernel(0.05),
                                        PolymerizationKernel(0.0), PolymerizationKernel(0.7)])
    def test_symmetry_and_nonnegativity(self, kernel):
        rng = np.random.default_rng(20240917)
        n = 10.0 ** rng.uniform(-3, 3, 10_000)
        eps = 10.0 ** rng.uniform(-3, 3, 10_000)
        a, b = kernel.eval(n, eps), kernel.eval(eps, n)
        assert np.array_equal(a, b)  # symmetric by construction, exactly
        assert np.all(a >= 0.0)

    def test_separable_factor_consistency(self):
        rng = np.random.default_rng(7)
        n = 10.0 ** rng.uniform(-3, 3, 100)
        eps = 10.0 ** rng.uniform(-3, 3, 100)
        for kernel in (ProductKernel(0.05), PolymerizationKernel(0.0)):
            np.testing.assert_allclose(
                kernel.separable_factor(n) * kernel.separable_factor(eps),
                kernel.eval(n, eps), rtol=1e-13)

    def test_nonpositive_volume_rejected(self):
        with pytest.raises(ValueError):
            ProductKernel(1.0).eval(-1.0, 2.0)
        with pytest.raises(ValueError):
            PolymerizationKernel(0.0).eval(1.0, 0.0)


class TestBreakage:
    def test_binary_example(self):
        assert cb.binary_breakage().eval(1.0, 4.0) == pytest.approx(0.5, rel=1e-14)

    def test_ternary_example(self):
        # 3 / (2 * 2 * 1)
        assert cb.ternary_breakage().eval(1.0, 4.0) == pytest.approx(0.75, rel=1e-14)

    def test_outside_support(self):
        assert cb.binary_breakage().eval(5.0, 4.0) == 0.0

    def test_nonpositive_mother_rejected(self):
        with pytest.raises(ValueError):
            cb.binary_breakage().eval(1.0, -2.0)

    def test_mass_violating_family_rejected(self):
        with pytest.raises(ValueError):
            PowerBreakage(2.0, 0.9)
        with pytest.raises(ValueError):
            PowerBreakage(2.5, 1.0)

    def test_daughter_counts(self):
        assert cb.binary_breakage().daughter_count() == 2.0
        assert cb.ternary_breakage().daughter_count() == 3.0
        quartic = PowerBreakage(4.0 / 3.0, 1.0 / 3.0)
        assert quartic.daughter_count() == pytest.approx(4.0, rel=1e-12)
        # independent quadrature of the defining integral
        oracle = geometric_panel_quad(lambda n: quartic.eval(n, 2.5), 2.5e-30, 2.5, panels=240)
        assert oracle == pytest.approx(quartic.daughter_count(), rel=1e-5)

    @pytest.mark.parametrize("b", [cb.binary_breakage(), cb.ternary_breakage()])
    def test_mass_conservation_quadrature(self, b):
        rng = np.random.default_rng(11)
        for eps in 10.0 ** rng.uniform(-2, 2, 25):
            got = geometric_panel_quad(lambda n: n * b.eval(n, eps), eps * 1e-12, eps)
            assert got == pytest.approx(eps, rel=1e-6)

    def test_exact_cell_integrals(self):
        b = cb.ternary_breakage()
        eps = 3.0
        num = geometric_panel_quad(lambda n: b.eval(n, eps), 0.2, 1.1, panels=32)
        assert b.number_integral(0.2, 1.1, eps) == pytest.approx(num, rel=1e-10)
        mass = geometric_panel_quad(lambda n: n * b.eval(n, eps), 0.2, 1.1, panels=32)
        assert b.mass_integral(0.2, 1.1, eps) == pytest.approx(mass, rel=1e-10)


class TestInitialConditions:
    def test_exponential_limit(self):
        assert InitialCondition("exponential").eval(1e-14) == pytest.approx(1.0, abs=1e-12)

    def test_gaussian_limit(self):
        # 1 / sqrt(2 pi)
        expected = 1.0 / np.sqrt(2.0 * np.pi)
        assert InitialCondition("gaussian").eval(1e-14) == pytest.approx(expected, rel=1e-12)

    def test_squared_exponential_at_one(self):
        assert InitialCondition("squared_exponential").eval(1.0) == pytest.approx(np.exp(-1.0), rel=1e-14)

    def test_positive_with_finite_moments(self):
        for kind in ("exponential", "gaussian", "squared_exponential"):
            ic = InitialCondition(kind)
            n = np.geomspace(1e-6, 26.0, 1000)  # within double-precision underflow range
            assert np.all(ic.eval(n) > 0.0)
            for k in range(3):
                val = geometric_panel_quad(lambda x: x**k * ic.eval(x), 1e-9, 60.0, panels=200)
                assert np.isfinite(val)

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError):
            InitialCondition("uniform")


class TestPresets:
    def test_six_presets(self):
        presets = cb.all_presets()
        assert [p.case_id for p in presets] == [1, 2, 3, 4, 5, 6]

    def test_case_contents(self):
        p1 = cb.case_preset(1)
        assert isinstance(p1.kernel, ProductKernel) and p1.kernel.scale == 1.0
        assert (p1.breakage.sigma, p1.breakage.j) == (2.0, 1.0)
        assert p1.ic.kind == "exponential" and p1.has_exact_solution

        p3 = cb.case_preset(3)
        assert isinstance(p3.kernel, PolymerizationKernel) and p3.kernel.a == 0.0

        p4 = cb.case_preset(4)
        assert (p4.breakage.sigma, p4.breakage.j) == (1.5, 0.5)
        assert p4.ic.kind == "exponential"

        p5 = cb.case_preset(5)
        assert p5.ic.kind == "gaussian" and (p5.breakage.sigma, p5.breakage.j) == (1.5, 0.5)

        p6 = cb.case_preset(6)
        assert isinstance(p6.kernel, ProductKernel) and p6.kernel.scale == pytest.approx(1.0 / 20.0)
        assert p6.ic.kind == "squared_exponential"
        assert not p6.has_exact_solution

    def test_bad_case_id(self):
        with pytest.raises(ValueError):
            cb.case_preset(7)
