"""
Finite-dimensional reduction z' + A z = B alpha of the controlled heat
equation, piecewise-constant controls, and exact propagation.
"""
import logging
from dataclasses import dataclass, field
from typing import List, Sequence, Union

import numpy as np

import thermoctl.utils.logging as utils_logging
from thermoctl.spectral import ControlRegion, EigenBasis, coupling_matrix


logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ControlBounds:
    """Per-channel amplitude bounds a_1..a_k of the box U."""

    amplitudes: tuple

    def __post_init__(self):
        amplitudes = tuple(float(a) for a in self.amplitudes)
        if len(amplitudes) == 0:
            utils_logging.log_and_raise(
                ValueError, "At least one control bound is needed"
            )
        if not all(np.isfinite(a) and a > 0 for a in amplitudes):
            utils_logging.log_and_raise(
                ValueError, f"Control bounds should be positive: {amplitudes}"
            )
        object.__setattr__(self, "amplitudes", amplitudes)

    def __len__(self):
        return len(self.amplitudes)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.amplitudes, dtype=float)


@dataclass
class ChannelSchedule:
    """
    Piecewise-constant control of one channel.

    `values[p]` holds on the right-closed segment (times[p], times[p + 1]];
    the value at t = 0 is values[0].
    """

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.times.ndim != 1 or len(self.times) == 0:
            raise ValueError("times should be a non-empty 1D array")
        if self.times[0] != 0.0:
            raise ValueError("Schedules start at t = 0")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("Switching times should be strictly increasing")
        if len(self.values) != len(self.times) - 1:
            raise ValueError(
                "A schedule with p + 1 times needs p values"
                f" (got {len(self.times)} times, {len(self.values)} values)"
            )

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    def value_at(self, t: float) -> float:
        if len(self.values) == 0:
            return 0.0
        idx = np.searchsorted(self.times, t, side="left") - 1
        idx = int(np.clip(idx, 0, len(self.values) - 1))
        return float(self.values[idx])

    def canonical(self) -> "ChannelSchedule":
        """Same control with equal adjacent segments merged"""
        if len(self.values) == 0:
            return ChannelSchedule(self.times.copy(), self.values.copy())
        keep = np.concatenate(
            [[True], self.values[1:] != self.values[:-1]]
        )
        values = self.values[keep]
        times = np.concatenate([self.times[:-1][keep], self.times[-1:]])
        return ChannelSchedule(times=times, values=values)


@dataclass
class ControlTrajectory:
    """
    Piecewise-constant k-channel control on [0, horizon].

    Parameters
    ----------
    horizon: float
        Final time T >= 0.
    channels: List[ChannelSchedule]
        One schedule per channel, each ending at `horizon`.
    """

    horizon: float
    channels: List[ChannelSchedule] = field(default_factory=list)

    def __post_init__(self):
        self.horizon = float(self.horizon)
        if self.horizon < 0:
            raise ValueError(f"Negative horizon {self.horizon}")
        for j, channel in enumerate(self.channels):
            if channel.horizon != self.horizon:
                raise ValueError(
                    f"Channel {j + 1} ends at {channel.horizon}, horizon is"
                    f" {self.horizon}"
                )

    @classmethod
    def zero(cls, horizon: float, k: int) -> "ControlTrajectory":
        if horizon == 0:
            channels = [ChannelSchedule([0.0], []) for _ in range(k)]
        else:
            channels = [
                ChannelSchedule([0.0, horizon], [0.0]) for _ in range(k)
            ]
        return cls(horizon=horizon, channels=channels)

    @property
    def k(self) -> int:
        return len(self.channels)

    def breakpoints(self) -> np.ndarray:
        """Sorted union of all channels' switching times"""
        if self.k == 0:
            return np.array([0.0, self.horizon])
        return np.unique(np.concatenate([c.times for c in self.channels]))

    def value_at(self, t: float) -> np.ndarray:
        return np.array([c.value_at(t) for c in self.channels])

    def canonical(self) -> "ControlTrajectory":
        return ControlTrajectory(
            horizon=self.horizon,
            channels=[c.canonical() for c in self.channels],
        )

    def check_bounds(self, bounds: ControlBounds, rtol: float = 1e-12):
        if len(bounds) != self.k:
            utils_logging.log_and_raise(
                ValueError,
                f"{len(bounds)} bounds for {self.k} control channels",
            )
        for j, (channel, amp) in enumerate(
            zip(self.channels, bounds.amplitudes)
        ):
            if np.any(np.abs(channel.values) > amp * (1 + rtol)):
                utils_logging.log_and_raise(
                    ValueError, f"Channel {j + 1} exceeds its bound {amp}"
                )


@dataclass
class ReducedSystem:
    """
    Reduced system z' + A z = B alpha, z(0) = z0.

    A = diag(eigenvalues). The constructor accepts any m >= 1 so that
    scalar instances can be built directly; `build_reduced` enforces the
    standing assumption m >= 2.
    """

    eigenvalues: np.ndarray
    coupling: np.ndarray
    z0: np.ndarray
    bounds: ControlBounds

    def __post_init__(self):
        self.eigenvalues = np.atleast_1d(
            np.asarray(self.eigenvalues, dtype=float)
        )
        self.coupling = np.atleast_2d(np.asarray(self.coupling, dtype=float))
        self.z0 = np.atleast_1d(np.asarray(self.z0, dtype=float))
        if not isinstance(self.bounds, ControlBounds):
            self.bounds = ControlBounds(tuple(self.bounds))
        self.check_attributes_sanity()

    def check_attributes_sanity(self):
        """Check dimensions and eigenvalue ordering"""
        m = len(self.eigenvalues)
        if np.any(self.eigenvalues <= 0):
            utils_logging.log_and_raise(
                ValueError, "Eigenvalues should be positive"
            )
        if np.any(np.diff(self.eigenvalues) <= 0):
            utils_logging.log_and_raise(
                ValueError, "Eigenvalues should be strictly increasing"
            )
        if self.coupling.shape[0] != m:
            utils_logging.log_and_raise(
                ValueError,
                f"Coupling has {self.coupling.shape[0]} rows for {m} modes",
            )
        if self.z0.shape != (m,):
            utils_logging.log_and_raise(
                ValueError, f"z0 should have {m} entries, got {self.z0.shape}"
            )
        if len(self.bounds) != self.coupling.shape[1]:
            utils_logging.log_and_raise(
                ValueError,
                f"{len(self.bounds)} bounds for {self.coupling.shape[1]}"
                " control channels",
            )

    @property
    def m(self) -> int:
        return len(self.eigenvalues)

    @property
    def k(self) -> int:
        return self.coupling.shape[1]

    @property
    def drift(self) -> np.ndarray:
        """A = diag(lambda_1..lambda_m)"""
        return np.diag(self.eigenvalues)

    def free_response(self, t: float) -> np.ndarray:
        """e^{-At} z0"""
        return np.exp(-self.eigenvalues * t) * self.z0

    def with_bounds(
        self, bounds: Union[ControlBounds, Sequence[float]]
    ) -> "ReducedSystem":
        return ReducedSystem(
            eigenvalues=self.eigenvalues,
            coupling=self.coupling,
            z0=self.z0,
            bounds=bounds,
        )


def project_initial(y0_coeffs: Sequence[float], m: int) -> np.ndarray:
    """First `m` eigen-coefficients of y0, zero-padded"""
    coeffs = np.asarray(y0_coeffs, dtype=float).ravel()
    out = np.zeros(m)
    n = min(m, len(coeffs))
    out[:n] = coeffs[:n]
    return out


def build_reduced(
    basis: EigenBasis,
    region: ControlRegion,
    y0_coeffs: Sequence[float],
    m: int,
    k: int,
    bounds: Union[ControlBounds, Sequence[float]],
) -> ReducedSystem:
    """Reduced system of the first `m` modes driven by `k` control channels

    Parameters
    ----------
    basis : EigenBasis
        Eigensystem with truncation >= max(m, k).
    region : ControlRegion
        Control region omega.
    y0_coeffs : Sequence[float]
        Eigen-coefficients <y0, xi_i> of the initial state.
    m : int
        Index of the target S_m; m >= 2.
    k : int
        Number of control channels; k >= 1.
    bounds : Union[ControlBounds, Sequence[float]]
        Amplitude bounds a_1..a_k.

    Returns
    -------
    ReducedSystem
    """
    if m < 2:
        utils_logging.log_and_raise(
            ValueError, f"The target index m should be >= 2, got {m}"
        )
    if k < 1:
        utils_logging.log_and_raise(
            ValueError, f"At least one control channel is needed, got {k}"
        )
    if not isinstance(bounds, ControlBounds):
        bounds = ControlBounds(tuple(bounds))
    if len(bounds) != k:
        utils_logging.log_and_raise(
            ValueError, f"{len(bounds)} bounds given for k = {k} channels"
        )
    system = ReducedSystem(
        eigenvalues=basis.eigenvalues[:m],
        coupling=coupling_matrix(basis, region, m, k),
        z0=project_initial(y0_coeffs, m),
        bounds=bounds,
    )
    logger.debug(f"Built reduced system with m={m}, k={k}")
    return system


def sweep_states(
    eigenvalues: np.ndarray,
    coupling: np.ndarray,
    z0: np.ndarray,
    traj: ControlTrajectory,
    sample_times: Sequence[float],
) -> np.ndarray:
    """States at `sample_times` (any order), by exact segment updates.

    Across a constant-control segment of length h, each mode updates as
    z <- e^{-lambda h} z + ((1 - e^{-lambda h}) / lambda) (B v).

    Returns
    -------
    np.ndarray
        Array of shape (len(sample_times), len(eigenvalues)).
    """
    sample_times = np.asarray(sample_times, dtype=float)
    order = np.argsort(sample_times, kind="stable")
    sample_times = sample_times[order]
    knots = np.unique(np.concatenate([traj.breakpoints(), sample_times]))
    knots = knots[knots <= max(sample_times.max(initial=0.0), 0.0)]
    states = np.zeros((len(sample_times), len(eigenvalues)))
    z = np.array(z0, dtype=float)
    for s, t in enumerate(sample_times):
        if t == 0.0:
            states[order[s]] = z0
    position = 0.0
    sample_idx = int(np.searchsorted(sample_times, 0.0, side="right"))
    for knot in knots[knots > 0]:
        h = knot - position
        value = traj.value_at(0.5 * (position + knot)) if traj.k else None
        decay = np.exp(-eigenvalues * h)
        z = decay * z
        if value is not None:
            z = z + (-np.expm1(-eigenvalues * h) / eigenvalues) * (
                coupling @ value
            )
        position = knot
        while (
            sample_idx < len(sample_times)
            and sample_times[sample_idx] == knot
        ):
            states[order[sample_idx]] = z
            sample_idx += 1
    return states


def propagate(
    system: ReducedSystem, traj: ControlTrajectory, t: float
) -> np.ndarray:
    """State z(t) of the reduced system under `traj`

    Exact per-segment exponential updates, no time stepping.

    Parameters
    ----------
    system : ReducedSystem
    traj : ControlTrajectory
        Control with k channels and horizon T.
    t : float
        Time in [0, T].

    Returns
    -------
    np.ndarray
        z(t), length m.
    """
    if not 0 <= t <= traj.horizon:
        utils_logging.log_and_raise(
            ValueError, f"t = {t} outside [0, {traj.horizon}]"
        )
    if traj.k != system.k:
        utils_logging.log_and_raise(
            ValueError,
            f"Control has {traj.k} channels, system expects {system.k}",
        )
    return sweep_states(
        system.eigenvalues, system.coupling, system.z0, traj, [t]
    )[0]
