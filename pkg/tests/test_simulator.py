import unittest

import numpy as np

import thermoctl.simulator as simulator
from thermoctl.reduced import (
    ChannelSchedule,
    ControlTrajectory,
    build_reduced,
    propagate,
)
from thermoctl.solver import diagonal_synthesis
from thermoctl.spectral import ControlRegion, build_interval_basis


class TestSimulateTruncated(unittest.TestCase):
    """
    Test type: functional (public API)
    """

    def setUp(self):
        self.basis = build_interval_basis(1.0, 10)
        self.full = ControlRegion.full(self.basis.domain)
        self.half = ControlRegion(self.basis.domain, ((0.0, 0.5),))
        self.y0 = np.linspace(1.0, 0.1, 10)

    def test_zero_control_decays_every_mode(self):
        traj = ControlTrajectory.zero(0.3, 2)
        run = simulator.simulate_truncated(
            self.basis, self.half, traj, self.y0, n_samples=11
        )
        np.testing.assert_allclose(
            run.final_state,
            self.y0 * np.exp(-self.basis.eigenvalues * 0.3),
            rtol=1e-10,
            atol=0,
        )
        np.testing.assert_array_equal(run.states[0], self.y0)

    def test_full_domain_leaves_upper_modes_uncontrolled(self):
        system = build_reduced(
            self.basis, self.full, [1.0, 1.0], m=2, k=2, bounds=[1.0, 1.0]
        )
        control = diagonal_synthesis(system).control
        y0 = np.concatenate([[1.0, 1.0], self.y0[2:]])
        run = simulator.simulate_truncated(self.basis, self.full, control, y0)
        np.testing.assert_allclose(run.final_state[:2], 0.0, atol=1e-12)
        np.testing.assert_allclose(
            run.final_state[2:],
            y0[2:] * np.exp(-self.basis.eigenvalues[2:] * control.horizon),
            rtol=1e-9,
            atol=0,
        )

    def test_leading_modes_agree_with_reduced_propagation(self):
        traj = ControlTrajectory(
            horizon=0.4,
            channels=[
                ChannelSchedule([0.0, 0.13, 0.4], [1.0, -1.0]),
                ChannelSchedule([0.0, 0.27, 0.4], [-0.5, 0.5]),
            ],
        )
        system = build_reduced(
            self.basis, self.half, self.y0, m=3, k=2, bounds=[1.0, 0.5]
        )
        run = simulator.simulate_truncated(
            self.basis, self.half, traj, self.y0, n_samples=37
        )
        for t in [0.13, 0.27, 0.4]:
            np.testing.assert_allclose(
                run.state_at(t)[:3], propagate(system, traj, t), atol=1e-10
            )

    def test_switching_times_are_sampled(self):
        traj = ControlTrajectory(
            horizon=1.0,
            channels=[ChannelSchedule([0.0, 0.123, 1.0], [1.0, -1.0])],
        )
        run = simulator.simulate_truncated(
            self.basis, self.half, traj, self.y0, n_samples=5
        )
        self.assertIn(0.123, run.times)
        self.assertEqual(len(run.times), 6)

    def test_tail_norm_nonincreasing_without_control(self):
        run = simulator.simulate_truncated(
            self.basis,
            self.half,
            ControlTrajectory.zero(0.5, 1),
            self.y0,
            n_samples=51,
        )
        tail = np.linalg.norm(run.states[:, 2:], axis=1)
        self.assertTrue(np.all(np.diff(tail) <= 0))

    def test_state_at_and_frame(self):
        run = simulator.simulate_truncated(
            self.basis,
            self.half,
            ControlTrajectory.zero(1.0, 1),
            self.y0,
            n_samples=3,
        )
        np.testing.assert_array_equal(run.state_at(0.5), run.states[1])
        self.assertRaises(ValueError, run.state_at, 0.25)
        frame = run.to_frame()
        self.assertEqual(
            list(frame.columns), ["t"] + [f"y_{i}" for i in range(1, 11)]
        )
        self.assertEqual(len(frame), 3)

    def test_except_if_more_channels_than_modes(self):
        self.assertRaises(
            ValueError,
            simulator.simulate_truncated,
            self.basis,
            self.half,
            ControlTrajectory.zero(1.0, 11),
            self.y0,
        )

    def test_except_if_no_samples(self):
        self.assertRaises(
            ValueError,
            simulator.simulate_truncated,
            self.basis,
            self.half,
            ControlTrajectory.zero(1.0, 1),
            self.y0,
            n_samples=0,
        )


class TestTargetDistance(unittest.TestCase):
    """
    Test type: functional (public API)
    """

    def test_only_leading_modes_count(self):
        self.assertEqual(simulator.target_distance([3.0, 4.0, 12.0], 2), 5.0)
        self.assertEqual(simulator.target_distance([0.0, 0.0, 7.0], 2), 0.0)

    def test_default_truncation(self):
        self.assertEqual(simulator.default_truncation(2), 20)
        self.assertEqual(simulator.default_truncation(8), 32)
