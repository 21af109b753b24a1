"""
Bang-bang verification and switching structure of control trajectories.
"""
import logging
from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np

from thermoctl.reduced import ChannelSchedule, ControlBounds, ControlTrajectory
import thermoctl.utils.logging as utils_logging


logger = logging.getLogger(__name__)

VERTEX_RTOL = 1e-9
IDLE_RTOL = 1e-12
DEFAULT_TOL_FRACTION = 1e-6


@dataclass
class BangBangReport:
    """
    Bang-bang verdict of a control trajectory.

    Parameters
    ----------
    is_bang_bang: bool
    off_vertex_fractions: List[float]
        Per channel, share of [0, T] where |value| < a_j (1 - 1e-9).
    idle_intervals: List[Tuple[int, float, float]]
        Maximal (channel, t_start, t_end) intervals where the channel is 0.
        Channels are numbered from 1.
    off_vertex_intervals: List[Tuple[int, float, float]]
        Maximal intervals strictly inside the box (idle ones included).
    switching_counts: List[int]
    tol_fraction: float
    """

    is_bang_bang: bool
    off_vertex_fractions: List[float]
    idle_intervals: List[Tuple[int, float, float]] = field(
        default_factory=list
    )
    off_vertex_intervals: List[Tuple[int, float, float]] = field(
        default_factory=list
    )
    switching_counts: List[int] = field(default_factory=list)
    tol_fraction: float = DEFAULT_TOL_FRACTION

    def to_dict(self) -> dict:
        return {
            "is_bang_bang": self.is_bang_bang,
            "off_vertex_fractions": self.off_vertex_fractions,
            "idle_intervals": [list(iv) for iv in self.idle_intervals],
            "off_vertex_intervals": [
                list(iv) for iv in self.off_vertex_intervals
            ],
            "switching_counts": self.switching_counts,
            "tol_fraction": self.tol_fraction,
        }


def _intervals(schedule: ChannelSchedule, mask: np.ndarray, channel: int):
    """Maximal runs of consecutive masked segments"""
    runs = []
    start = None
    for p, flagged in enumerate(mask):
        if flagged and start is None:
            start = schedule.times[p]
        if not flagged and start is not None:
            runs.append((channel, float(start), float(schedule.times[p])))
            start = None
    if start is not None:
        runs.append((channel, float(start), float(schedule.times[-1])))
    return runs


def _channel_switches(values: np.ndarray, amp: float) -> int:
    signs = np.sign(values[np.abs(values) > IDLE_RTOL * amp])
    return int(np.count_nonzero(signs[1:] != signs[:-1]))


def switching_count(traj: ControlTrajectory) -> List[int]:
    """Per-channel sign changes between consecutive nonzero segments

    Idle (exactly zero) segments are skipped: a sign change across an idle
    run still counts once, an idle run between equal signs counts nothing.
    """
    counts = []
    for channel in traj.canonical().channels:
        values = channel.values
        scale = float(np.max(np.abs(values))) if len(values) else 0.0
        counts.append(_channel_switches(values, scale))
    return counts


def verify_bangbang(
    traj: ControlTrajectory,
    bounds: ControlBounds,
    tol_fraction: float = DEFAULT_TOL_FRACTION,
) -> BangBangReport:
    """Check |alpha_j(t)| = a_j for almost every t in (0, T)

    "Almost every" means the off-vertex duration of each channel is at most
    `tol_fraction` of T, and no idle interval is longer than that.

    Parameters
    ----------
    traj : ControlTrajectory
        Trajectory with T > 0.
    bounds : ControlBounds
        Box bounds a_1..a_k.
    tol_fraction : float
        Tolerated off-vertex share of [0, T].

    Returns
    -------
    BangBangReport
    """
    if traj.horizon <= 0:
        utils_logging.log_and_raise(
            ValueError, "Bang-bang verification needs a positive horizon"
        )
    if len(bounds) != traj.k:
        utils_logging.log_and_raise(
            ValueError, f"{len(bounds)} bounds for {traj.k} channels"
        )
    horizon = traj.horizon
    fractions, idle, off_vertex, counts = [], [], [], []
    for j, (schedule, amp) in enumerate(
        zip(traj.canonical().channels, bounds.amplitudes), start=1
    ):
        values = schedule.values
        lengths = np.diff(schedule.times)
        off_mask = np.abs(values) < amp * (1 - VERTEX_RTOL)
        idle_mask = np.abs(values) <= IDLE_RTOL * amp
        fractions.append(float(np.sum(lengths[off_mask]) / horizon))
        idle.extend(_intervals(schedule, idle_mask, j))
        off_vertex.extend(_intervals(schedule, off_mask, j))
        counts.append(_channel_switches(values, amp))
    longest_idle = max((b - a for _, a, b in idle), default=0.0)
    is_bang_bang = (
        all(f <= tol_fraction for f in fractions)
        and longest_idle <= tol_fraction * horizon
    )
    logger.debug(
        f"Bang-bang verdict {is_bang_bang}, off-vertex fractions {fractions}"
    )
    return BangBangReport(
        is_bang_bang=is_bang_bang,
        off_vertex_fractions=fractions,
        idle_intervals=idle,
        off_vertex_intervals=off_vertex,
        switching_counts=counts,
        tol_fraction=tol_fraction,
    )
