import unittest

import numpy as np
import pytest

import thermoctl.genericity as genericity
from thermoctl.conditions import check_D2
from thermoctl.exceptions import EmptyScanError, PreconditionError
from thermoctl.spectral import (
    ControlRegion,
    build_interval_basis,
    control_coupling,
)


class TestFij(unittest.TestCase):
    """
    Test type: functional (public API)
    """

    def setUp(self):
        self.basis = build_interval_basis(1.0, 6)

    def test_first_mode_centered_ball(self):
        self.assertAlmostEqual(
            genericity.fij(self.basis, 1, 1, 0.5, 0.25),
            4 * (0.5 + 1 / np.pi),
            places=12,
        )
        self.assertAlmostEqual(
            genericity.fij(self.basis, 1, 1, 0.5, 0.25), 3.273239, places=6
        )

    def test_antisymmetric_product_vanishes_at_center(self):
        for rho in [0.01, 0.1, 0.4]:
            self.assertAlmostEqual(
                genericity.fij(self.basis, 1, 2, 0.5, rho), 0.0, places=12
            )

    def test_small_radius_limit(self):
        x, rho = 0.37, 1e-6
        for i, j in [(1, 1), (2, 5), (3, 6)]:
            pointwise = 2 * float(
                self.basis.evaluate(i, x) * self.basis.evaluate(j, x)
            )
            self.assertAlmostEqual(
                genericity.fij(self.basis, i, j, x, rho), pointwise, delta=1e-6
            )

    def test_x_derivative_matches_finite_differences(self):
        h = 1e-6
        for i, j, x, rho in [(1, 2, 0.3, 0.05), (4, 4, 0.61, 0.2)]:
            central = (
                genericity.fij(self.basis, i, j, x + h, rho)
                - genericity.fij(self.basis, i, j, x - h, rho)
            ) / (2 * h)
            self.assertAlmostEqual(
                genericity.fij_dx(self.basis, i, j, x, rho),
                central,
                delta=1e-6,
            )

    def test_except_if_ball_leaves_domain(self):
        self.assertRaises(
            ValueError, genericity.fij, self.basis, 1, 1, 0.95, 0.1
        )
        self.assertRaises(
            ValueError, genericity.fij, self.basis, 1, 1, 0.5, 0.0
        )


class TestOmegaRhoMembership(unittest.TestCase):
    """
    Test type: functional (public API)
    """

    def setUp(self):
        self.basis = build_interval_basis(1.0, 4)
        self.region = ControlRegion(self.basis.domain, ((0.0, 0.25),))

    def _member(self, x, rho):
        return genericity.omega_rho_membership(
            x, rho, self.basis.domain, self.region
        )

    def test_ball_away_from_omega(self):
        self.assertTrue(self._member(0.6, 0.1))

    def test_ball_overlapping_omega(self):
        self.assertFalse(self._member(0.3, 0.1))

    def test_ball_leaving_domain(self):
        self.assertFalse(self._member(0.95, 0.1))

    def test_center_inside_omega(self):
        self.assertFalse(self._member(0.1, 0.01))
        self.assertFalse(self._member(0.25, 0.01))

    def test_ball_touching_omega_closure(self):
        self.assertFalse(self._member(0.35, 0.1))

    def test_non_positive_radius(self):
        self.assertFalse(self._member(0.6, 0.0))


class TestAugmentedCoupling(unittest.TestCase):
    """
    Test type: functional (public API)
    """

    def setUp(self):
        self.basis = build_interval_basis(1.0, 8)
        self.region = ControlRegion(self.basis.domain, ((0.0, 0.25),))

    def test_additive_over_the_ball(self):
        x, rho = 0.6, 0.1
        augmented = self.region.with_ball(x, rho)
        for i, j in [(1, 1), (1, 3), (2, 7), (8, 5)]:
            self.assertAlmostEqual(
                genericity.augmented_coupling(
                    self.basis, self.region, x, rho, i, j
                ),
                control_coupling(self.basis, augmented, i, j),
                delta=1e-12,
            )

    def test_symmetric(self):
        for i, j in [(1, 2), (3, 7), (4, 8)]:
            self.assertAlmostEqual(
                genericity.augmented_coupling(
                    self.basis, self.region, 0.6, 0.1, i, j
                ),
                genericity.augmented_coupling(
                    self.basis, self.region, 0.6, 0.1, j, i
                ),
                places=14,
            )

    def test_matrix_matches_entries(self):
        matrix = genericity.augmented_coupling_matrix(
            self.basis, self.region, 0.7, 0.05, 3, 2
        )
        self.assertEqual(matrix.shape, (3, 2))
        for i in range(1, 4):
            for j in range(1, 3):
                self.assertAlmostEqual(
                    matrix[i - 1, j - 1],
                    genericity.augmented_coupling(
                        self.basis, self.region, 0.7, 0.05, i, j
                    ),
                    places=14,
                )

    def test_tiny_region(self):
        tiny = ControlRegion(self.basis.domain, ((0.0, 0.01),))
        value = genericity.augmented_coupling(self.basis, tiny, 0.5, 0.1, 1, 1)
        self.assertAlmostEqual(
            value,
            control_coupling(self.basis, tiny, 1, 1)
            + genericity.ball_integral(self.basis, 0.5, 0.1, 1, 1),
            places=14,
        )
        self.assertGreater(
            value, genericity.ball_integral(self.basis, 0.5, 0.1, 1, 1)
        )

    def test_except_if_not_member(self):
        self.assertRaises(
            PreconditionError,
            genericity.augmented_coupling,
            self.basis,
            self.region,
            0.3,
            0.1,
            1,
            1,
        )
        self.assertRaises(
            PreconditionError,
            genericity.augmented_coupling_matrix,
            self.basis,
            self.region,
            0.95,
            0.1,
            2,
            2,
        )


class TestScanGrid(unittest.TestCase):
    """
    Test type: functional (public API)
    """

    def test_from_ranges(self):
        grid = genericity.ScanGrid.from_ranges(
            (0.55, 0.95), (0.005, 0.05), (200, 20), delta=1e-6, m=3, k=2
        )
        self.assertEqual(len(grid.xs), 200)
        self.assertEqual(len(grid.rhos), 20)
        self.assertEqual(grid.columns, 3)
        self.assertEqual(len(grid.points()), 4000)
        self.assertEqual(grid.to_dict()["x"], [0.55, 0.95, 200])

    def test_except_if_invalid(self):
        self.assertRaises(ValueError, genericity.ScanGrid, [0.5], [0.0])
        self.assertRaises(ValueError, genericity.ScanGrid, [], [0.1])
        self.assertRaises(
            ValueError, genericity.ScanGrid, [0.5], [0.1], delta=0.0
        )
        self.assertRaises(ValueError, genericity.ScanGrid, [0.5], [0.1], m=0)


class TestScan(unittest.TestCase):
    """
    Test type: functional (public API)
    """

    def setUp(self):
        self.basis = build_interval_basis(1.0, 10)
        self.region = ControlRegion(self.basis.domain, ((0.0, 0.5),))

    def test_half_interval_gets_certified_candidates(self):
        grid = genericity.ScanGrid.from_ranges(
            (0.55, 0.95), (0.005, 0.05), (200, 20), delta=1e-6, m=3, k=2
        )
        result = genericity.scan(self.basis, self.region, grid)
        self.assertGreaterEqual(len(result.candidates), 1)
        self.assertLess(result.zero_set_fraction, 0.01)
        self.assertEqual(len(result.table), 4000)
        margins = [c.min_magnitude for c in result.candidates]
        self.assertEqual(margins, sorted(margins, reverse=True))
        augmented, matrix = genericity.check_candidate(
            self.basis, self.region, result.best, m=3, k=2
        )
        self.assertEqual(len(augmented.intervals), 2)
        self.assertTrue(check_D2(matrix, 1e-6).passed)
        report = result.to_dict()
        self.assertEqual(
            report["admissible_points"], int(result.table["admissible"].sum())
        )
        self.assertLessEqual(len(report["candidates"]), 10)

    def test_two_by_two(self):
        grid = genericity.ScanGrid.from_ranges(
            (0.55, 0.95), (0.005, 0.05), (50, 5), delta=1e-6, m=2, k=2
        )
        result = genericity.scan(self.basis, self.region, grid, n_candidates=3)
        self.assertEqual(len(result.candidates), 3)

    def test_except_if_grid_inside_region(self):
        grid = genericity.ScanGrid.from_ranges(
            (0.1, 0.4), (0.01, 0.02), (10, 3), m=2, k=1
        )
        self.assertRaises(
            EmptyScanError, genericity.scan, self.basis, self.region, grid
        )

    def test_inadmissible_points_have_no_magnitude(self):
        grid = genericity.ScanGrid([0.45, 0.7], [0.1], m=2, k=1)
        table = genericity.scan(self.basis, self.region, grid).table
        self.assertEqual(table["admissible"].tolist(), [False, True])
        self.assertTrue(np.isnan(table["min_magnitude"].iloc[0]))


@pytest.mark.parametrize("n_x", [40, 120])
def test_zero_set_fraction_monotone_in_delta(n_x):
    basis = build_interval_basis(1.0, 10)
    region = ControlRegion(basis.domain, ((0.0, 0.5),))
    fractions = []
    for delta in [1e-8, 1e-4, 1e-3, 1e-2]:
        grid = genericity.ScanGrid.from_ranges(
            (0.55, 0.95), (0.005, 0.05), (n_x, 10), delta=delta, m=3, k=2
        )
        result = genericity.scan(basis, region, grid)
        fractions.append(result.zero_set_fraction)
    assert fractions == sorted(fractions)
