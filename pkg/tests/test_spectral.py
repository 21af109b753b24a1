import unittest

import hypothesis
import hypothesis.strategies as st
import numpy as np
import pytest

import thermoctl.spectral as spectral


def _quadrature_coupling(basis, region, i, j, panels=64, nodes=16):
    """Composite Gauss-Legendre value of <chi_omega xi_i, xi_j>"""
    x_ref, w_ref = np.polynomial.legendre.leggauss(nodes)
    total = 0.0
    for a, b in region.intervals:
        edges = np.linspace(a, b, panels + 1)
        half = 0.5 * np.diff(edges)
        mid = 0.5 * (edges[1:] + edges[:-1])
        x = (mid[:, None] + half[:, None] * x_ref[None, :]).ravel()
        w = (half[:, None] * w_ref[None, :]).ravel()
        total += np.sum(w * basis.evaluate(i, x) * basis.evaluate(j, x))
    return total


class TestBuildIntervalBasis(unittest.TestCase):
    """
    Test type: functional (public API)
    """

    def test_unit_interval_first_eigenvalue(self):
        basis = spectral.build_interval_basis(1.0, 1)
        self.assertAlmostEqual(basis.eigenvalues[0], np.pi ** 2, places=12)

    def test_three_modes_strictly_increasing(self):
        basis = spectral.build_interval_basis(1.0, 3)
        np.testing.assert_allclose(
            basis.eigenvalues, np.array([1.0, 4.0, 9.0]) * np.pi ** 2
        )
        self.assertTrue(np.all(np.diff(basis.eigenvalues) > 0))

    def test_length_two(self):
        basis = spectral.build_interval_basis(2.0, 1)
        self.assertAlmostEqual(basis.eigenvalues[0], np.pi ** 2 / 4)

    def test_except_if_invalid_length_or_truncation(self):
        self.assertRaises(ValueError, spectral.build_interval_basis, 0.0, 3)
        self.assertRaises(ValueError, spectral.build_interval_basis, -1.0, 3)
        self.assertRaises(ValueError, spectral.build_interval_basis, 1.0, 0)

    def test_modes_have_unit_norm(self):
        basis = spectral.build_interval_basis(1.5, 20)
        self.assertLess(basis.normalization_error(), 1e-10)

    def test_except_if_mode_index_out_of_range(self):
        basis = spectral.build_interval_basis(1.0, 3)
        self.assertRaises(ValueError, basis.evaluate, 4, 0.5)
        self.assertRaises(ValueError, basis.evaluate, 0, 0.5)


class TestControlRegion(unittest.TestCase):
    """
    Test type: functional (public API)
    """

    def setUp(self):
        self.domain = spectral.DomainSpec(1.0)

    def test_intervals_sorted_and_merged(self):
        region = spectral.ControlRegion(
            self.domain, ((0.6, 0.8), (0.1, 0.3), (0.3, 0.4))
        )
        self.assertEqual(region.intervals, ((0.1, 0.4), (0.6, 0.8)))
        self.assertAlmostEqual(region.measure, 0.5)

    def test_full_domain_detection(self):
        full = spectral.ControlRegion.full(self.domain)
        self.assertTrue(full.is_full_domain)
        merged = spectral.ControlRegion(self.domain, ((0.0, 0.5), (0.5, 1.0)))
        self.assertTrue(merged.is_full_domain)
        almost = spectral.ControlRegion(self.domain, ((0.0, 0.999999),))
        self.assertFalse(almost.is_full_domain)

    def test_except_if_degenerate_interval(self):
        self.assertRaises(
            ValueError, spectral.ControlRegion, self.domain, ((0.3, 0.3),)
        )
        self.assertRaises(
            ValueError, spectral.ControlRegion, self.domain, ((0.5, 0.2),)
        )
        self.assertRaises(
            ValueError, spectral.ControlRegion, self.domain, ((0.5, 1.2),)
        )
        self.assertRaises(ValueError, spectral.ControlRegion, self.domain, ())

    def test_distance_to_closure(self):
        region = spectral.ControlRegion(self.domain, ((0.0, 0.25),))
        self.assertAlmostEqual(region.distance_to_closure(0.5, 0.7), 0.25)
        self.assertEqual(region.distance_to_closure(0.2, 0.4), 0.0)

    def test_with_ball(self):
        region = spectral.ControlRegion(self.domain, ((0.0, 0.5),))
        augmented = region.with_ball(0.7, 0.05)
        self.assertEqual(len(augmented.intervals), 2)
        self.assertAlmostEqual(augmented.intervals[1][0], 0.65)
        self.assertAlmostEqual(augmented.intervals[1][1], 0.75)

    def test_to_json(self):
        self.assertEqual(
            spectral.ControlRegion.full(self.domain).to_json(), "full"
        )
        region = spectral.ControlRegion(self.domain, ((0.21, 0.54),))
        self.assertEqual(region.to_json(), {"intervals": [[0.21, 0.54]]})


class TestControlCoupling(unittest.TestCase):
    """
    Test type: functional (public API)
    """

    def setUp(self):
        self.basis = spectral.build_interval_basis(1.0, 12)
        self.full = spectral.ControlRegion.full(self.basis.domain)
        self.half = spectral.ControlRegion(self.basis.domain, ((0.0, 0.5),))

    def test_full_domain_is_orthonormal(self):
        self.assertEqual(
            spectral.control_coupling(self.basis, self.full, 2, 2), 1.0
        )
        self.assertEqual(
            spectral.control_coupling(self.basis, self.full, 1, 2), 0.0
        )

    def test_half_interval_values(self):
        c = spectral.control_coupling
        self.assertAlmostEqual(c(self.basis, self.half, 1, 1), 0.5, places=14)
        self.assertAlmostEqual(
            c(self.basis, self.half, 1, 2), 4 / (3 * np.pi), places=14
        )
        self.assertAlmostEqual(c(self.basis, self.half, 1, 3), 0.0, places=14)
        self.assertAlmostEqual(
            c(self.basis, self.half, 2, 3), 4 / (5 * np.pi), places=14
        )

    def test_except_if_index_out_of_range(self):
        self.assertRaises(
            ValueError, spectral.control_coupling, self.basis, self.half, 13, 1
        )

    def test_union_is_sum_of_intervals(self):
        intervals = ((0.05, 0.2), (0.43, 0.61), (0.8, 0.97))
        region = spectral.ControlRegion(self.basis.domain, intervals)
        parts = [
            spectral.ControlRegion(self.basis.domain, (iv,))
            for iv in intervals
        ]
        np.testing.assert_allclose(
            spectral.coupling_matrix(self.basis, region, 12, 12),
            sum(
                spectral.coupling_matrix(self.basis, p, 12, 12)
                for p in parts
            ),
            atol=1e-12,
            rtol=0,
        )

    def test_matches_quadrature(self):
        rng = np.random.default_rng(3)
        for _ in range(5):
            a, b = np.sort(rng.uniform(0.0, 1.0, size=2))
            region = spectral.ControlRegion(self.basis.domain, ((a, b),))
            for i, j in [(1, 1), (2, 7), (5, 12), (12, 12), (9, 4)]:
                self.assertAlmostEqual(
                    spectral.control_coupling(self.basis, region, i, j),
                    _quadrature_coupling(self.basis, region, i, j),
                    delta=1e-10,
                )


@hypothesis.settings(deadline=None)
@hypothesis.given(
    a=st.floats(min_value=0.0, max_value=0.9),
    width=st.floats(min_value=1e-3, max_value=0.1),
    i=st.integers(min_value=1, max_value=12),
    j=st.integers(min_value=1, max_value=12),
)
def test_coupling_is_exactly_symmetric(a, width, i, j):
    basis = spectral.build_interval_basis(1.0, 12)
    region = spectral.ControlRegion(basis.domain, ((a, a + width),))
    assert spectral.control_coupling(
        basis, region, i, j
    ) == spectral.control_coupling(basis, region, j, i)


@hypothesis.settings(deadline=None)
@hypothesis.given(
    cuts=st.lists(
        st.floats(min_value=0.0, max_value=2.0), min_size=3, max_size=3
    )
)
def test_interval_products_additive(cuts):
    a, b, c = sorted(cuts)
    whole = spectral.interval_products(2.0, a, c, 6, 6)
    split = spectral.interval_products(
        2.0, a, b, 6, 6
    ) + spectral.interval_products(2.0, b, c, 6, 6)
    np.testing.assert_allclose(whole, split, atol=1e-12, rtol=0)


class TestCouplingMatrix(unittest.TestCase):
    """
    Test type: functional (public API)
    """

    def setUp(self):
        self.basis = spectral.build_interval_basis(1.0, 5)
        self.full = spectral.ControlRegion.full(self.basis.domain)

    def test_full_domain_fewer_channels(self):
        np.testing.assert_array_equal(
            spectral.coupling_matrix(self.basis, self.full, 3, 2),
            [[1, 0], [0, 1], [0, 0]],
        )

    def test_full_domain_more_channels(self):
        np.testing.assert_array_equal(
            spectral.coupling_matrix(self.basis, self.full, 2, 3),
            [[1, 0, 0], [0, 1, 0]],
        )

    def test_half_interval_first_column(self):
        half = spectral.ControlRegion(self.basis.domain, ((0.0, 0.5),))
        matrix = spectral.coupling_matrix(self.basis, half, 3, 2)
        self.assertEqual(matrix.shape, (3, 2))
        np.testing.assert_allclose(
            matrix[:, 0], [0.5, 4 / (3 * np.pi), 0.0], atol=1e-14
        )

    def test_except_if_dimensions_exceed_truncation(self):
        self.assertRaises(
            ValueError, spectral.coupling_matrix, self.basis, self.full, 6, 1
        )
        self.assertRaises(
            ValueError, spectral.coupling_matrix, self.basis, self.full, 2, 0
        )


@pytest.mark.unit
def test_cos_integral_zero_frequency():
    c = np.array([0.0, np.pi])
    np.testing.assert_allclose(
        spectral._cos_integral(c, 0.25, 0.75), [0.5, 0.0], atol=1e-15
    )
