"""
Forward simulation of the heat equation truncated to M >> m modes.
"""
import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import pandas as pd

import thermoctl.utils.logging as utils_logging
from thermoctl.reduced import ControlTrajectory, project_initial, sweep_states
from thermoctl.spectral import ControlRegion, EigenBasis, coupling_matrix


logger = logging.getLogger(__name__)

DEFAULT_SAMPLES = 101


def default_truncation(m: int) -> int:
    return max(20, 4 * m)


@dataclass
class TruncatedTrajectory:
    """
    Mode coefficients y_1..y_M sampled along a controlled run.

    The sample grid contains every switching time of the driving control.
    """

    times: np.ndarray
    states: np.ndarray

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    def state_at(self, t: float) -> np.ndarray:
        idx = np.flatnonzero(self.times == t)
        if len(idx) == 0:
            raise ValueError(f"t = {t} is not a sample time")
        return self.states[idx[0]]

    def to_frame(self) -> pd.DataFrame:
        columns = [f"y_{i}" for i in range(1, self.states.shape[1] + 1)]
        frame = pd.DataFrame(self.states, columns=columns)
        frame.insert(0, "t", self.times)
        return frame


def simulate_truncated(
    basis: EigenBasis,
    region: ControlRegion,
    traj: ControlTrajectory,
    y0_coeffs: Sequence[float],
    n_samples: int = DEFAULT_SAMPLES,
) -> TruncatedTrajectory:
    """Exact mode-wise simulation of y_i' + lambda_i y_i = sum_j alpha_j B_ij

    All M = basis.truncation modes are driven through the full coupling
    rows <chi_omega xi_i, xi_j>, i <= M.

    Parameters
    ----------
    basis : EigenBasis
        Eigensystem with M modes.
    region : ControlRegion
    traj : ControlTrajectory
        Control with at most M channels.
    y0_coeffs : Sequence[float]
        Eigen-coefficients of y0 (zero-padded to M).
    n_samples : int
        Uniform samples on [0, T], merged with the switching times.

    Returns
    -------
    TruncatedTrajectory
    """
    n_modes = basis.truncation
    if traj.k > n_modes:
        utils_logging.log_and_raise(
            ValueError,
            f"{traj.k} control channels exceed the {n_modes} simulated modes",
        )
    if n_samples < 1:
        utils_logging.log_and_raise(
            ValueError, f"n_samples should be >= 1, got {n_samples}"
        )
    times = np.unique(
        np.concatenate(
            [np.linspace(0.0, traj.horizon, n_samples), traj.breakpoints()]
        )
    )
    if traj.k == 0:
        coupling = np.zeros((n_modes, 0))
    else:
        coupling = coupling_matrix(basis, region, n_modes, traj.k)
    states = sweep_states(
        basis.eigenvalues,
        coupling,
        project_initial(y0_coeffs, n_modes),
        traj,
        times,
    )
    logger.debug(f"Simulated {n_modes} modes on {len(times)} samples")
    return TruncatedTrajectory(times=times, states=states)


def target_distance(state: Sequence[float], m: int) -> float:
    """L2 distance to S_m = span(xi_{m+1}, ...), i.e. |(y_1, ..., y_m)|"""
    state = np.asarray(state, dtype=float)
    return float(np.linalg.norm(state[:m]))
