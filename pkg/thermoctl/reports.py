"""
JSON reports and CSV trajectories.
"""
import json
import logging
import os
from typing import Sequence

import numpy as np
import pandas as pd

from thermoctl.reduced import ChannelSchedule, ControlTrajectory


logger = logging.getLogger(__name__)

CONTROL_SAMPLES = 201


def _to_builtin(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"{type(obj)} is not JSON serializable")


def dumps_report(doc: dict) -> str:
    return json.dumps(doc, indent=2, sort_keys=True, default=_to_builtin)


def write_json(doc: dict, path: str) -> None:
    with open(path, "w") as f:
        f.write(dumps_report(doc) + "\n")
    logger.info(f"Wrote {path}")


def read_json(path: str) -> dict:
    with open(path) as f:
        return json.load(f)


def control_sample_times(
    traj: ControlTrajectory, n_uniform: int = CONTROL_SAMPLES
) -> np.ndarray:
    """Switching times of every channel merged with a uniform grid"""
    if traj.horizon == 0:
        return np.array([])
    return np.unique(
        np.concatenate(
            [traj.breakpoints(), np.linspace(0.0, traj.horizon, n_uniform)]
        )
    )


def control_to_frame(
    traj: ControlTrajectory, n_uniform: int = CONTROL_SAMPLES
) -> pd.DataFrame:
    """Columns t, alpha_1..alpha_k

    Row values follow the right-closed convention: at a switching time the
    row holds the value of the segment ending there.
    """
    columns = ["t"] + [f"alpha_{j}" for j in range(1, traj.k + 1)]
    times = control_sample_times(traj, n_uniform)
    rows = [[t] + list(traj.value_at(t)) for t in times]
    return pd.DataFrame(rows, columns=columns, dtype=float)


def frame_to_control(frame: pd.DataFrame) -> ControlTrajectory:
    """Inverse of `control_to_frame`"""
    channel_columns = [c for c in frame.columns if c.startswith("alpha_")]
    if frame.empty:
        return ControlTrajectory.zero(0.0, len(channel_columns))
    times = frame["t"].to_numpy(dtype=float)
    channels = [
        ChannelSchedule(
            times=times, values=frame[c].to_numpy(dtype=float)[1:]
        ).canonical()
        for c in channel_columns
    ]
    return ControlTrajectory(horizon=float(times[-1]), channels=channels)


def write_control_csv(
    traj: ControlTrajectory, path: str, n_uniform: int = CONTROL_SAMPLES
) -> None:
    control_to_frame(traj, n_uniform).to_csv(path, index=False)
    logger.info(f"Wrote {path}")


def read_control_csv(path: str) -> ControlTrajectory:
    frame = pd.read_csv(path, float_precision="round_trip")
    return frame_to_control(frame)


def write_frame(frame: pd.DataFrame, path: str, columns: Sequence[str] = None):
    frame.to_csv(path, index=False, columns=columns)
    logger.info(f"Wrote {path}")


def output_path(out_dir: str, name: str) -> str:
    os.makedirs(out_dir, exist_ok=True)
    return os.path.join(out_dir, name)
