import math

import numpy as np
import pytest
import sympy
from hypothesis import given, settings, strategies as st
from scipy import special

from modaldiv.field_core import GridSpec, inner_product
from modaldiv.modes import (
    DEFAULT_WAIST,
    HgExpansion,
    ModeSpec,
    ModeTooLargeError,
    evaluate,
    evaluate_hg,
    evaluate_lg,
    lg_as_hg_superposition,
    lg_ring_radii,
    lg_to_hg_indices,
    mode_order,
    phase_winding,
    transform_coefficient,
)

W0 = DEFAULT_WAIST


def grid_for(order, samples=256):
    return GridSpec(samples, 10 * W0 * math.sqrt(order + 1))


def sympy_coefficient(n, m, k):
    """b(n, m, k) straight from the derivative definition, in exact arithmetic."""
    t = sympy.symbols("t")
    N = n + m
    deriv = sympy.diff((1 - t) ** n * (1 + t) ** m, t, k).subs(t, 0)
    pref = sympy.sqrt(sympy.factorial(N - k) * sympy.factorial(k) / (2**N * sympy.factorial(n) * sympy.factorial(m)))
    return float(pref * deriv / sympy.factorial(k))


def scipy_hg(n, m, w0, grid):
    X, Y = grid.coordinates()
    def u(j, x):
        c = (2 / np.pi) ** 0.25 / math.sqrt(w0 * 2.0**j * math.factorial(j))
        return c * special.eval_hermite(j, math.sqrt(2) * x / w0) * np.exp(-(x / w0) ** 2)
    return u(n, X) * u(m, Y)


def scipy_lg_amplitude(l, p, w0, grid):
    X, Y = grid.coordinates()
    r2 = (X**2 + Y**2) / w0**2
    c = math.sqrt(2 * math.factorial(p) / (math.pi * math.factorial(p + abs(l)))) / w0
    return np.abs(c * (2 * r2) ** (abs(l) / 2) * special.eval_genlaguerre(p, abs(l), 2 * r2) * np.exp(-r2))


class TestModeSpec:
    def test_orders(self):
        assert mode_order(ModeSpec.hg(2, 2)) == 4
        assert mode_order(ModeSpec.lg(6, 1)) == 8
        assert mode_order(ModeSpec.lg(0, 0)) == 0
        assert mode_order(ModeSpec.lg(-3, 2)) == 7

    @pytest.mark.parametrize("args", [("HG", -1, 0), ("HG", 0, -1), ("LG", 1, -1), ("XX", 0, 0)])
    def test_invalid(self, args):
        with pytest.raises(ValueError):
            ModeSpec(*args, W0)

    def test_invalid_waist(self):
        with pytest.raises(ValueError):
            ModeSpec.hg(0, 0, 0.0)

    @pytest.mark.parametrize("text,spec", [
        ("HG_2_2", ModeSpec.hg(2, 2)),
        ("LG_-2_1", ModeSpec.lg(-2, 1)),
        ("HG22", ModeSpec.hg(2, 2)),
        ("LG61", ModeSpec.lg(6, 1)),
    ])
    def test_parse(self, text, spec):
        assert ModeSpec.parse(text) == spec

    def test_labels(self):
        assert ModeSpec.lg(2, 1).label == "LG21"
        assert ModeSpec.hg(4, 4).long_label == "HG_4_4"
        assert ModeSpec.parse(ModeSpec.lg(-2, 1).long_label) == ModeSpec.lg(-2, 1)

    def test_default_waist(self):
        # N = 4 second-moment radius is 1.4 mm
        assert ModeSpec.lg(2, 1).second_moment_radius() == pytest.approx(1.4e-3, rel=1e-12)
        assert W0 == pytest.approx(0.626e-3, abs=1e-6)


class TestIndices:
    @pytest.mark.parametrize("l,p,nm", [(2, 1, (3, 1)), (0, 0, (0, 0)), (-2, 1, (1, 3))])
    def test_examples(self, l, p, nm):
        assert lg_to_hg_indices(l, p) == nm

    @given(st.integers(-30, 30), st.integers(0, 30))
    def test_relations(self, l, p):
        n, m = lg_to_hg_indices(l, p)
        assert n >= 0 and m >= 0
        assert n - m == l and min(n, m) == p
        assert n + m == 2 * p + abs(l)


class TestTransformCoefficient:
    def test_golden(self):
        expect = [0.5, -0.5, 0.0, 0.5, -0.5]
        for k, v in enumerate(expect):
            assert transform_coefficient(3, 1, k) == pytest.approx(v, abs=1e-15)

    def test_trivial(self):
        assert transform_coefficient(0, 0, 0) == 1.0
        assert transform_coefficient(7, 1, 4) == 0.0

    @pytest.mark.parametrize("k", [-1, 5])
    def test_out_of_range(self, k):
        with pytest.raises(ValueError):
            transform_coefficient(3, 1, k)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 7), st.integers(0, 7), st.data())
    def test_matches_derivative_oracle(self, n, m, data):
        k = data.draw(st.integers(0, n + m))
        assert transform_coefficient(n, m, k) == pytest.approx(sympy_coefficient(n, m, k), abs=1e-13)

    @pytest.mark.parametrize("N", range(11))
    def test_unitarity(self, N):
        for n in range(N + 1):
            s = sum(transform_coefficient(n, N - n, k) ** 2 for k in range(N + 1))
            assert abs(s - 1) < 1e-12

    @settings(max_examples=50)
    @given(st.integers(0, 20), st.integers(0, 20))
    def test_unitarity_high_order(self, n, m):
        s = sum(transform_coefficient(n, m, k) ** 2 for k in range(n + m + 1))
        assert abs(s - 1) < 1e-12


class TestSuperposition:
    def test_eq_golden(self):
        c = lg_as_hg_superposition(2, 1).as_array()
        np.testing.assert_allclose(c, [0.5, -0.5j, 0, -0.5j, -0.5], atol=1e-12, rtol=0)

    def test_gaussian(self):
        np.testing.assert_allclose(lg_as_hg_superposition(0, 0).as_array(), [1.0])

    def test_l1(self):
        c = lg_as_hg_superposition(1, 0).as_array()
        np.testing.assert_allclose(c, [1 / math.sqrt(2), -1j / math.sqrt(2)], atol=1e-15)

    def test_l1_against_overlaps(self):
        g = grid_for(1)
        lg = evaluate_lg(1, 0, W0, g)
        c = [inner_product(evaluate_hg(1 - k, k, W0, g), lg) for k in range(2)]
        np.testing.assert_allclose(c, lg_as_hg_superposition(1, 0).as_array(), atol=1e-10)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(-10, 10), st.integers(0, 5))
    def test_unit_norm(self, l, p):
        assert abs(lg_as_hg_superposition(l, p).norm_squared() - 1) < 1e-12

    def test_expansion_length_checked(self):
        with pytest.raises(ValueError):
            HgExpansion(2, (1.0, 0.0))

    @pytest.mark.parametrize("N", range(7))
    def test_grid_identity(self, N):
        g = grid_for(N)
        for l in range(-N, N + 1, 2):
            p = (N - abs(l)) // 2
            a = evaluate_lg(l, p, W0, g).samples
            b = lg_as_hg_superposition(l, p).synthesize(W0, g).samples
            assert np.abs(a - b).max() < 1e-6


class TestEvaluation:
    def test_hg_against_scipy(self):
        g = grid_for(6)
        for n, m in [(0, 0), (1, 0), (2, 3), (4, 2)]:
            np.testing.assert_allclose(evaluate_hg(n, m, W0, g).samples, scipy_hg(n, m, W0, g), atol=1e-9, rtol=0)

    def test_lg_amplitude_against_scipy(self):
        g = grid_for(8)
        for l, p in [(0, 0), (2, 1), (-3, 2), (6, 1)]:
            np.testing.assert_allclose(np.abs(evaluate_lg(l, p, W0, g).samples),
                                       scipy_lg_amplitude(l, p, W0, g), atol=1e-9, rtol=0)

    def test_gaussian_peak_and_power(self):
        g = grid_for(0)
        f = evaluate_hg(0, 0, W0, g)
        c = g.samples_per_axis // 2
        assert np.unravel_index(np.argmax(f.intensity), g.shape) == (c, c)
        assert np.isrealobj(f.samples.real) and np.all(f.samples.imag == 0)

    @pytest.mark.parametrize("n,m", [(1, 0), (2, 3), (3, 3), (4, 1)])
    def test_hg_parity(self, n, m):
        s = evaluate_hg(n, m, W0, grid_for(n + m)).samples[1:, 1:]
        np.testing.assert_allclose(s[:, ::-1], (-1) ** n * s, atol=1e-12)
        np.testing.assert_allclose(s[::-1, :], (-1) ** m * s, atol=1e-12)

    def test_hg10_nodal_line(self):
        g = grid_for(1)
        s = evaluate_hg(1, 0, W0, g).samples
        assert np.all(s[:, g.samples_per_axis // 2] == 0)

    def test_lg00_equals_hg00(self):
        g = grid_for(0)
        assert np.abs(evaluate_lg(0, 0, W0, g).samples - evaluate_hg(0, 0, W0, g).samples).max() < 1e-10

    @pytest.mark.parametrize("l,p", [(2, 1), (3, 0), (6, 1)])
    def test_lg_rotational_symmetry(self, l, p):
        s = evaluate_lg(l, p, W0, grid_for(2 * p + abs(l))).intensity[1:, 1:]
        np.testing.assert_allclose(s.T, s, atol=1e-9 * s.max())
        np.testing.assert_allclose(np.rot90(s), s, atol=1e-9 * s.max())

    @pytest.mark.parametrize("l,p", [(6, 1), (2, 1), (-3, 0), (1, 2)])
    def test_phase_winding(self, l, p):
        g = grid_for(2 * p + abs(l), 512)
        f = evaluate_lg(l, p, W0, g)
        radius = lg_ring_radii(l, p, W0)[-1]
        # azimuthal factor is exp(-i l phi), fixed by the HG expansion
        assert phase_winding(f, radius) == pytest.approx(-2 * np.pi * l, abs=1e-6)

    def test_ring_count(self):
        assert len(lg_ring_radii(6, 1, W0)) == 2
        assert len(lg_ring_radii(0, 3, W0)) == 4

    def test_too_large(self):
        with pytest.raises(ModeTooLargeError, match="extent must be at least"):
            evaluate(ModeSpec.hg(4, 4), GridSpec(64, 5e-3))


class TestOrthogonality:
    def test_gram_matrix_n_le_6(self):
        g = grid_for(6)
        modes = [evaluate_hg(n, N - n, W0, g).samples.ravel() for N in range(7) for n in range(N + 1)]
        M = np.stack(modes)
        gram = M.conj() @ M.T * g.pixel_area
        assert np.abs(gram - np.eye(len(modes))).max() < 1e-6

    @pytest.mark.parametrize("a,b", [
        (ModeSpec.hg(2, 2), ModeSpec.lg(2, 1)),
        (ModeSpec.hg(4, 4), ModeSpec.lg(6, 1)),
    ])
    def test_stated_pairs(self, a, b):
        g = grid_for(8)
        assert abs(inner_product(evaluate(a, g), evaluate(b, g))) < 1e-6

    def test_hg22_not_in_lg21_expansion(self):
        g = grid_for(4)
        field = lg_as_hg_superposition(2, 1).synthesize(W0, g)
        assert abs(inner_product(evaluate_hg(2, 2, W0, g), field)) < 1e-6
