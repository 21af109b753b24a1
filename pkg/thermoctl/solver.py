"""
Minimal-time solvers.

Closed-form synthesis for the full-domain (diagonal) cases, a numerical
min-time solver for coupled systems (support-function feasibility, bisection
on the horizon, Pontryagin extraction of a bang-bang control), and an
exhaustive vertex-control oracle used for acceptance testing.
"""
import enum
import itertools
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.optimize
import tqdm

import thermoctl.utils.logging as utils_logging
from thermoctl.conditions import (
    DEFAULT_DELTA,
    ExistenceTag,
    classify_existence,
)
from thermoctl.exceptions import (
    InfeasibleHorizonError,
    NonexistenceError,
    PreconditionError,
    RootFindingError,
    SphereConvergenceError,
)
from thermoctl.reduced import (
    ChannelSchedule,
    ControlTrajectory,
    ReducedSystem,
    propagate,
)
from thermoctl.spectral import ControlRegion


logger = logging.getLogger(__name__)

ROOT_GRID_POINTS = 256
GAUSS_NODES = 16
FEASIBILITY_SLACK = 1e-12
SINGULAR_CHANNEL_RTOL = 1e-9
SINGULAR_SEGMENTS = 64
ORACLE_MAX_COMBINATIONS = 2 ** 16
SPHERE_GTOL = 1e-9
DECISION_RTOL = 1e-8
EDGE_MERGE_RTOL = 1e-12
TERMINAL_TOL = 1e-6


class SolveMethod(enum.Enum):
    CLOSED_FORM = "CLOSED_FORM"
    BISECTION = "BISECTION"
    ORACLE = "ORACLE"


@dataclass
class SolverSettings:
    """
    Numerical settings of the min-time solver.

    Parameters
    ----------
    tol: float
        Bisection tolerance on the optimal time.
    horizon: Optional[float]
        Initial feasible horizon guess T_hi; doubled from `initial_horizon`
        when None.
    initial_horizon: float
        Starting horizon of the doubling search.
    horizon_cap: float
        Doubling stops beyond initial_horizon * horizon_cap.
    seed: int
        Seed of the random sphere starts.
    delta: float
        Threshold used by the structural conditions.
    n_random_starts: int
        Random unit starts of the sphere descent, added to the 2m axis
        starts while doubling the horizon. Bisection steps start from the
        previous minimizer and the axes, and fall back to the random
        starts when their sign is undecided.
    max_descent_iter: int
        Iteration cap of one BFGS run on the sphere.
    quadrature: str
        "exact" (antiderivative per panel) or "gauss" (16-node
        Gauss-Legendre per panel) for the support function.
    polish: bool
        Refine (T, eta) by least squares on the terminal residual.
    progress: bool
        Show tqdm progress bars.
    """

    tol: float = 1e-6
    horizon: Optional[float] = None
    initial_horizon: float = 1.0
    horizon_cap: float = 2.0 ** 16
    seed: int = 0
    delta: float = DEFAULT_DELTA
    n_random_starts: int = 32
    max_descent_iter: int = 200
    quadrature: str = "exact"
    polish: bool = True
    progress: bool = False

    def __post_init__(self):
        if self.tol <= 0:
            raise ValueError(f"tol should be positive, got {self.tol}")
        if self.quadrature not in ("exact", "gauss"):
            raise ValueError(
                f"quadrature should be 'exact' or 'gauss', got"
                f" {self.quadrature}"
            )
        if self.horizon is not None and self.horizon <= 0:
            raise ValueError(f"horizon should be positive, got {self.horizon}")


@dataclass
class SolveReport:
    """
    Result of a min-time solve.

    Parameters
    ----------
    optimal_time: float
        T*.
    control: ControlTrajectory
        Control steering z0 to 0 at T*.
    feasibility_margin: Optional[float]
        min over the sphere of g_{T*} (None on the closed-form path).
    dual_direction: Optional[np.ndarray]
        Unit minimizer eta* (None on the closed-form path).
    terminal_error: float
        ||z(T*)||.
    method: SolveMethod
    labels: List[str]
        Extra tags, e.g. "outside-theory".
    bracket: Optional[Tuple[float, float]]
        Final bisection bracket (infeasible, feasible).
    """

    optimal_time: float
    control: ControlTrajectory
    feasibility_margin: Optional[float]
    dual_direction: Optional[np.ndarray]
    terminal_error: float
    method: SolveMethod
    labels: List[str] = field(default_factory=list)
    bracket: Optional[Tuple[float, float]] = None

    def to_dict(self) -> dict:
        return {
            "optimal_time": self.optimal_time,
            "feasibility_margin": self.feasibility_margin,
            "dual_direction": (
                None
                if self.dual_direction is None
                else [float(v) for v in self.dual_direction]
            ),
            "terminal_error": self.terminal_error,
            "method": self.method.value,
            "labels": self.labels,
            "bracket": None if self.bracket is None else list(self.bracket),
        }


@dataclass
class MarginResult:
    """min over unit eta of g_T(eta), its minimizer and descent stats"""

    value: float
    direction: np.ndarray
    restarts: int
    converged: int


@dataclass
class BruteForceResult:
    """
    Outcome of the exhaustive vertex-control oracle.

    `time` is None when no grid horizon meets its tolerance.
    """

    time: Optional[float]
    grid: np.ndarray
    best_norms: np.ndarray
    tolerances: np.ndarray
    segments: int

    @property
    def grid_step(self) -> float:
        if len(self.grid) < 2:
            return 0.0
        return float(np.max(np.diff(self.grid)))


# --- Closed-form diagonal synthesis ---------------------------------------


def diagonal_mode_time(
    eigenvalue: float, amplitude: float, z0_i: float
) -> float:
    """Minimal time of the scalar problem z' + lambda z = a, |a| <= amp

    T_i = ln(1 + (lambda / amp) |z0_i|) / lambda.
    """
    if eigenvalue <= 0 or amplitude <= 0:
        utils_logging.log_and_raise(
            ValueError,
            f"Eigenvalue and amplitude should be positive, got {eigenvalue},"
            f" {amplitude}",
        )
    return float(np.log1p(eigenvalue / amplitude * abs(z0_i)) / eigenvalue)


def _is_block_identity(system: ReducedSystem) -> bool:
    return bool(np.array_equal(system.coupling, np.eye(system.m, system.k)))


def diagonal_synthesis(system: ReducedSystem) -> SolveReport:
    """Closed-form optimal time and control when omega = Omega

    Channel i <= min(m, k) carries -sgn(z0_i) a_i on [0, T_i] and 0
    afterwards; surplus channels are identically 0. T* = max of the active
    T_i.

    Parameters
    ----------
    system : ReducedSystem
        Built from the full domain (coupling is the exact block identity).

    Returns
    -------
    SolveReport
    """
    m, k = system.m, system.k
    if not _is_block_identity(system):
        utils_logging.log_and_raise(
            PreconditionError,
            "Diagonal synthesis needs the full-domain coupling (I; 0)",
        )
    if k < m and np.any(system.z0[k:] != 0):
        utils_logging.log_and_raise(
            PreconditionError,
            "Diagonal synthesis called on an instance without optimal"
            " control (k < m and nonzero tail)",
        )
    active = min(m, k)
    amps = system.bounds.amplitudes
    mode_times = [
        diagonal_mode_time(system.eigenvalues[i], amps[i], system.z0[i])
        for i in range(active)
    ]
    horizon = max(mode_times) if mode_times else 0.0
    if horizon == 0.0:
        control = ControlTrajectory.zero(0.0, k)
        return SolveReport(
            optimal_time=0.0,
            control=control,
            feasibility_margin=None,
            dual_direction=None,
            terminal_error=0.0,
            method=SolveMethod.CLOSED_FORM,
        )
    channels = []
    for j in range(k):
        if j >= active or system.z0[j] == 0:
            channels.append(ChannelSchedule([0.0, horizon], [0.0]))
            continue
        value = -np.sign(system.z0[j]) * amps[j]
        if mode_times[j] < horizon:
            channels.append(
                ChannelSchedule([0.0, mode_times[j], horizon], [value, 0.0])
            )
        else:
            channels.append(ChannelSchedule([0.0, horizon], [value]))
    control = ControlTrajectory(horizon=horizon, channels=channels)
    terminal = float(np.linalg.norm(propagate(system, control, horizon)))
    logger.info(f"Closed-form optimal time {horizon:.9g}")
    return SolveReport(
        optimal_time=horizon,
        control=control,
        feasibility_margin=None,
        dual_direction=None,
        terminal_error=terminal,
        method=SolveMethod.CLOSED_FORM,
    )


# --- Support function of the reachable set --------------------------------


class _Horizon:
    """Quantities of a fixed horizon T shared by all eta evaluations"""

    def __init__(self, system: ReducedSystem, horizon: float):
        self.system = system
        self.horizon = float(horizon)
        self.taus = np.linspace(0.0, self.horizon, ROOT_GRID_POINTS)
        self.grid_exp = np.exp(-np.outer(self.taus, system.eigenvalues))
        self.target = -system.free_response(self.horizon)


def _switching_roots(
    lams: np.ndarray, coeffs: np.ndarray, taus: np.ndarray, samples: np.ndarray
) -> List[float]:
    """Roots in tau of f(tau) = sum_i coeffs_i e^{-lams_i tau} on the grid"""

    def f(tau):
        return float(np.dot(coeffs, np.exp(-lams * tau)))

    signs = np.sign(samples)
    roots = []
    for idx in np.flatnonzero(signs[:-1] * signs[1:] < 0):
        root, info = scipy.optimize.brentq(
            f, taus[idx], taus[idx + 1], xtol=1e-15, full_output=True
        )
        if not info.converged:
            utils_logging.log_and_raise(
                RootFindingError,
                f"Switching root not converged in [{taus[idx]},"
                f" {taus[idx + 1]}]",
            )
        roots.append(root)
    # Sign changes through an exact grid zero.
    touches = (signs[1:-1] == 0) & (signs[:-2] * signs[2:] < 0)
    roots.extend(float(t) for t in taus[1:-1][touches])
    return sorted(roots)


def _panel_signs(lams, coeffs, edges) -> np.ndarray:
    mids = 0.5 * (edges[1:] + edges[:-1])
    return np.sign(np.exp(-np.outer(mids, lams)) @ coeffs)


def _panel_exponentials(lams: np.ndarray, edges: np.ndarray) -> np.ndarray:
    """int_{a}^{b} e^{-lambda tau} d tau per panel (rows) and mode (cols)"""
    a, b = edges[:-1, None], edges[1:, None]
    return (np.exp(-lams * a) - np.exp(-lams * b)) / lams


def _gauss_abs_integrals(lams, coeffs, edges) -> np.ndarray:
    nodes, weights = np.polynomial.legendre.leggauss(GAUSS_NODES)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    tau = mid[:, None] + half[:, None] * nodes[None, :]
    values = np.abs(np.exp(-tau[..., None] * lams) @ coeffs)
    return half * (values @ weights)


def _channel_panels(ctx: _Horizon, eta: np.ndarray, j: int):
    """Panel edges (tau = T - s) and signs of channel j's switching function"""
    lams = ctx.system.eigenvalues
    coeffs = eta * ctx.system.coupling[:, j]
    samples = ctx.grid_exp @ coeffs
    roots = _switching_roots(lams, coeffs, ctx.taus, samples)
    edges = np.unique([0.0] + roots + [ctx.horizon])
    return coeffs, edges, _panel_signs(lams, coeffs, edges)


def _support(ctx: _Horizon, eta: np.ndarray, quadrature: str = "exact"):
    """h_T(eta) and the endpoint of the maximizing bang-bang control"""
    system = ctx.system
    lams = system.eigenvalues
    amps = system.bounds.as_array()
    endpoint = np.zeros(system.m)
    value = 0.0
    for j in range(system.k):
        coeffs, edges, signs = _channel_panels(ctx, eta, j)
        integrals = _panel_exponentials(lams, edges)
        endpoint += (
            amps[j] * system.coupling[:, j] * (signs @ integrals)
        )
        if quadrature == "gauss":
            value += amps[j] * float(
                np.sum(_gauss_abs_integrals(lams, coeffs, edges))
            )
    if quadrature == "exact":
        value = float(np.dot(endpoint, eta))
    return value, endpoint


def support_function(
    system: ReducedSystem,
    horizon: float,
    eta: Sequence[float],
    quadrature: str = "exact",
) -> Tuple[float, np.ndarray]:
    """Support function h_T(eta) of the reachable set at time T

    h_T(eta) = int_0^T sum_j a_j |(B^T e^{-A (T - s)} eta)_j| ds. The
    integrand is split at the zeros of each channel's exponential polynomial
    (bracketed on a 256-point grid, refined by Brent's method).

    Parameters
    ----------
    system : ReducedSystem
    horizon : float
        T > 0.
    eta : Sequence[float]
        Direction (need not be normalized).
    quadrature : str
        "exact" or "gauss" panel integration.

    Returns
    -------
    Tuple[float, np.ndarray]
        h_T(eta) and the endpoint x_T(eta) of the maximizing control, which
        is also the gradient of h_T at eta.
    """
    if horizon <= 0:
        utils_logging.log_and_raise(
            ValueError, f"Horizon should be positive, got {horizon}"
        )
    ctx = _Horizon(system, horizon)
    return _support(ctx, np.asarray(eta, dtype=float), quadrature=quadrature)


def _gap(ctx: _Horizon, eta: np.ndarray, quadrature: str):
    """g_T(eta) = h_T(eta) - <r(T), eta> and its gradient"""
    value, endpoint = _support(ctx, eta, quadrature=quadrature)
    return value - float(np.dot(ctx.target, eta)), endpoint - ctx.target


def _sphere_starts(m: int, n_random: int, seed: int, warm_start=None):
    starts = []
    if warm_start is not None:
        starts.append(np.asarray(warm_start, dtype=float))
    for i in range(m):
        for sign in (1.0, -1.0):
            axis = np.zeros(m)
            axis[i] = sign
            starts.append(axis)
    rng = np.random.default_rng(seed)
    for _ in range(n_random):
        v = rng.standard_normal(m)
        starts.append(v / np.linalg.norm(v))
    return starts


class _BelowThreshold(Exception):
    """Raised from inside the minimizer once a value is below `stop_below`"""

    def __init__(self, eta: np.ndarray, value: float):
        super().__init__()
        self.eta = eta
        self.value = value


def _sphere_minimize(
    objective, start, max_iter: int, gtol: float, stop_below=None
):
    """BFGS on v, with g evaluated at eta = v / ||v||

    Returns the unit minimizer, its value and whether the run converged.
    A line search stalling on precision (BFGS status 2) sits at a
    stationary point or a kink of g and counts as converged.
    """

    def fun(v):
        norm = np.linalg.norm(v)
        eta = v / norm
        value, grad = objective(eta)
        if stop_below is not None and value < stop_below:
            raise _BelowThreshold(eta, value)
        return value, (grad - np.dot(grad, eta) * eta) / norm

    start = np.asarray(start, dtype=float)
    try:
        fit = scipy.optimize.minimize(
            fun,
            start / np.linalg.norm(start),
            jac=True,
            method="BFGS",
            options={"gtol": gtol, "maxiter": max_iter},
        )
    except _BelowThreshold as e:
        return e.eta, float(e.value), True
    eta = fit.x / np.linalg.norm(fit.x)
    return eta, float(fit.fun), fit.status in (0, 2)


def feasibility_margin(
    system: ReducedSystem,
    horizon: float,
    settings: Optional[SolverSettings] = None,
    warm_start: Optional[Sequence[float]] = None,
    stop_below: Optional[float] = None,
    random_starts: bool = True,
) -> MarginResult:
    """min over unit eta of g_T(eta) = h_T(eta) - <r(T), eta>

    r(T) = -e^{-AT} z0. The margin is >= 0 exactly when 0 is reachable at
    time T. The sphere minimization runs BFGS on the normalized
    parametrization from the 2m signed axes and `settings.n_random_starts`
    seeded random unit vectors; the best value wins, ties going to the
    earliest start. Runs that hit `settings.max_descent_iter` still count
    when their best value lies clearly on one side of the threshold
    (`stop_below`, or 0).

    Parameters
    ----------
    system : ReducedSystem
    horizon : float
        T > 0.
    settings : Optional[SolverSettings]
    warm_start : Optional[Sequence[float]]
        Extra first start, e.g. the previous bisection step's minimizer.
    stop_below : Optional[float]
        Stop as soon as a start reaches a value below this threshold (used
        by bisection, which only needs the sign).
    random_starts : bool
        Add the seeded random starts to the warm start and the axes.

    Returns
    -------
    MarginResult

    Raises
    ------
    SphereConvergenceError
        No run converged and the best value is within the decision band of
        the threshold.
    """
    if horizon <= 0:
        utils_logging.log_and_raise(
            ValueError, f"Horizon should be positive, got {horizon}"
        )
    settings = settings or SolverSettings()
    ctx = _Horizon(system, horizon)
    scale = 1.0 + float(np.linalg.norm(ctx.target))

    def objective(eta):
        return _gap(ctx, eta, settings.quadrature)

    starts = _sphere_starts(
        system.m,
        settings.n_random_starts if random_starts else 0,
        settings.seed,
        warm_start,
    )
    best_value, best_eta = np.inf, None
    converged = 0
    for n_run, start in enumerate(starts, start=1):
        eta, value, ok = _sphere_minimize(
            objective,
            start,
            settings.max_descent_iter,
            SPHERE_GTOL * scale,
            stop_below,
        )
        converged += int(ok)
        if value < best_value:
            best_value, best_eta = value, eta
        if stop_below is not None and best_value < stop_below:
            break
    threshold = 0.0 if stop_below is None else stop_below
    undecided = abs(best_value - threshold) <= DECISION_RTOL * scale
    if converged == 0:
        if undecided:
            utils_logging.log_and_raise(
                SphereConvergenceError,
                f"No sphere descent converged at T = {horizon}"
                f" ({n_run} restarts)",
                restarts=n_run,
            )
        logger.debug(
            f"No sphere descent converged at T = {horizon}, best value"
            f" {best_value:.3g} decides the sign"
        )
    return MarginResult(
        value=float(best_value),
        direction=best_eta,
        restarts=n_run,
        converged=converged,
    )


# --- Pontryagin extraction --------------------------------------------------


def _channel_scales(ctx: _Horizon, eta: np.ndarray) -> np.ndarray:
    amps = ctx.system.bounds.as_array()
    samples = ctx.grid_exp @ (eta[:, None] * ctx.system.coupling)
    return amps * np.max(np.abs(samples), axis=0)


def _merge_edges(edges: np.ndarray, horizon: float) -> np.ndarray:
    """Drop interior edges closer than EDGE_MERGE_RTOL * T to a kept one"""
    gap = EDGE_MERGE_RTOL * horizon
    kept = [0.0]
    for edge in edges[1:-1]:
        if edge - kept[-1] > gap and horizon - edge > gap:
            kept.append(float(edge))
    kept.append(float(horizon))
    return np.array(kept)


def _bang_schedule(ctx: _Horizon, eta: np.ndarray, j: int, orientation: float):
    """Channel j's bang-bang schedule in forward time s"""
    amp = ctx.system.bounds.amplitudes[j]
    coeffs, edges, _ = _channel_panels(ctx, eta, j)
    edges = _merge_edges(edges, ctx.horizon)
    signs = _panel_signs(ctx.system.eigenvalues, coeffs, edges)
    # tau = T - s: reverse panels to forward time.
    times = ctx.horizon - edges[::-1]
    times[0] = 0.0
    values = orientation * amp * signs[::-1]
    return ChannelSchedule(times=times, values=values).canonical()


def _segment_response(system: ReducedSystem, horizon: float, edges, j: int):
    """Terminal response of channel j to a unit value on each segment"""
    lams = system.eigenvalues
    a, b = edges[:-1, None], edges[1:, None]
    gains = (
        np.exp(-lams * (horizon - b)) - np.exp(-lams * (horizon - a))
    ) / lams
    return (gains * system.coupling[:, j]).T


def _complete_singular(
    system: ReducedSystem,
    horizon: float,
    channels: List[Optional[ChannelSchedule]],
) -> List[ChannelSchedule]:
    """Fill singular channels with a bounded least-squares correction"""
    singular = [j for j, c in enumerate(channels) if c is None]
    if not singular:
        return channels
    partial = [
        c if c is not None else ChannelSchedule([0.0, horizon], [0.0])
        for c in channels
    ]
    residual = propagate(
        system, ControlTrajectory(horizon=horizon, channels=partial), horizon
    )
    edges = np.linspace(0.0, horizon, SINGULAR_SEGMENTS + 1)
    columns = [_segment_response(system, horizon, edges, j) for j in singular]
    matrix = np.hstack(columns)
    amps = np.repeat([system.bounds.amplitudes[j] for j in singular],
                     SINGULAR_SEGMENTS)
    fit = scipy.optimize.lsq_linear(
        matrix, -residual, bounds=(-amps, amps), tol=1e-14
    )
    for n, j in enumerate(singular):
        values = fit.x[n * SINGULAR_SEGMENTS:(n + 1) * SINGULAR_SEGMENTS]
        partial[j] = ChannelSchedule(times=edges, values=values).canonical()
    logger.debug(f"Completed singular channels {[j + 1 for j in singular]}")
    return partial


def _extract(system: ReducedSystem, horizon: float, eta: np.ndarray,
             singular: Optional[List[int]] = None):
    """Extracted control and its terminal error, best of both orientations"""
    ctx = _Horizon(system, horizon)
    if singular is None:
        scales = _channel_scales(ctx, eta)
        cutoff = SINGULAR_CHANNEL_RTOL * max(float(np.max(scales)), 1e-300)
        singular = [j for j in range(system.k) if scales[j] <= cutoff]
    best = None
    for orientation in (1.0, -1.0):
        channels = [
            None if j in singular else _bang_schedule(ctx, eta, j, orientation)
            for j in range(system.k)
        ]
        channels = _complete_singular(system, horizon, channels)
        control = ControlTrajectory(horizon=horizon, channels=channels)
        error = float(np.linalg.norm(propagate(system, control, horizon)))
        if best is None or error < best[1]:
            best = (control, error)
    return best[0], best[1], singular


def extract_bangbang(
    system: ReducedSystem, horizon: float, eta: Sequence[float]
) -> ControlTrajectory:
    """Bang-bang control from the dual direction eta at the optimal time

    Channel j carries a_j * sign(s_j(s)), with switching function
    s_j(s) = (B^T e^{-A (T - s)} eta)_j; switching times are the roots of
    s_j. Both orientations are tried and the one landing closer to 0 is
    kept. Channels whose switching function vanishes identically are
    completed by a bounded least-squares piecewise-constant control.

    Parameters
    ----------
    system : ReducedSystem
    horizon : float
        Optimal time T*.
    eta : Sequence[float]
        Minimizer of the feasibility margin at T*.

    Returns
    -------
    ControlTrajectory
    """
    if horizon <= 0:
        utils_logging.log_and_raise(
            ValueError, f"Horizon should be positive, got {horizon}"
        )
    eta = np.asarray(eta, dtype=float)
    control, _, _ = _extract(system, horizon, eta / np.linalg.norm(eta))
    return control


def _polish(system, horizon, eta, singular, bracket, tol):
    """Shooting refinement of (T, eta) on the terminal residual"""

    def residual(params):
        t, direction = params[0], params[1:]
        norm = np.linalg.norm(direction)
        if t <= 0 or norm == 0:
            return np.full(system.m + 1, 1e6)
        control, _, _ = _extract(system, t, direction / norm, singular)
        return np.concatenate(
            [propagate(system, control, t), [norm - 1.0]]
        )

    start = np.concatenate([[horizon], eta])
    fit = scipy.optimize.least_squares(
        residual, start, method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15
    )
    t = float(fit.x[0])
    if not bracket[0] - tol <= t <= bracket[1] + tol:
        logger.debug(f"Polish left the bracket (T = {t}), discarded")
        return None
    direction = fit.x[1:] / np.linalg.norm(fit.x[1:])
    return t, direction


# --- Bisection --------------------------------------------------------------


def uncontrolled_modes(system: ReducedSystem) -> List[int]:
    """1-based modes with an exactly zero coupling row and z0_i != 0

    Such a mode decays as e^{-lambda_i t} z0_i and never reaches 0.
    """
    rows = np.all(system.coupling == 0, axis=1) & (system.z0 != 0)
    return [int(i) + 1 for i in np.flatnonzero(rows)]


def min_time_bisect(
    system: ReducedSystem, settings: Optional[SolverSettings] = None
) -> SolveReport:
    """Minimal time by bisection on the sign of the feasibility margin

    A feasible horizon is found by doubling from `settings.initial_horizon`
    (or taken from `settings.horizon`), then bisected down to
    `settings.tol`; bisection steps warm-start the sphere descent from the
    previous minimizer. The control is extracted from the margin's minimizer
    at the feasible end and, when possible, polished by shooting. A terminal
    error above TERMINAL_TOL is logged and labelled
    "terminal-error-above-tolerance".

    Parameters
    ----------
    system : ReducedSystem
    settings : Optional[SolverSettings]

    Returns
    -------
    SolveReport

    Raises
    ------
    InfeasibleHorizonError
        No feasible horizon up to initial_horizon * horizon_cap.
    SphereConvergenceError
        The sign of the margin stays undecided at some horizon.
    """
    settings = settings or SolverSettings()
    if np.all(system.z0 == 0):
        return SolveReport(
            optimal_time=0.0,
            control=ControlTrajectory.zero(0.0, system.k),
            feasibility_margin=0.0,
            dual_direction=None,
            terminal_error=0.0,
            method=SolveMethod.BISECTION,
        )

    undriven = uncontrolled_modes(system)
    if undriven:
        utils_logging.log_and_raise(
            InfeasibleHorizonError,
            f"Modes {undriven} are not driven by any channel and start"
            " away from 0: 0 is not reachable at any horizon",
            horizon=np.inf,
        )

    def margin(t, warm=None, stop_below=None, random_starts=True):
        try:
            return feasibility_margin(
                system,
                t,
                settings,
                warm_start=warm,
                stop_below=stop_below,
                random_starts=random_starts,
            )
        except SphereConvergenceError:
            if random_starts:
                raise
            logger.debug(f"Sign undecided at T = {t}, adding random starts")
            return feasibility_margin(
                system, t, settings, warm_start=warm, stop_below=stop_below
            )

    def feasible(t, warm=None, random_starts=True):
        slack = FEASIBILITY_SLACK * float(
            np.linalg.norm(system.free_response(t))
        )
        result = margin(t, warm, -slack, random_starts)
        return result.value >= -slack, result

    hi = settings.horizon or settings.initial_horizon
    cap = hi * settings.horizon_cap
    lo = 0.0
    ok, result = feasible(hi)
    while not ok:
        lo = hi
        hi *= 2.0
        if hi > cap:
            utils_logging.log_and_raise(
                InfeasibleHorizonError,
                f"0 is not reachable up to the horizon cap {cap}",
                horizon=lo,
            )
        ok, result = feasible(hi, result.direction)
    logger.info(f"Feasible horizon {hi}, bisecting down to tol {settings.tol}")
    n_steps = int(np.ceil(np.log2(max((hi - lo) / settings.tol, 1.0))))
    warm = result.direction
    for _ in tqdm.tqdm(
        range(n_steps), desc="Bisection", disable=not settings.progress
    ):
        mid = 0.5 * (lo + hi)
        ok, result = feasible(mid, warm, random_starts=False)
        warm = result.direction
        if ok:
            hi = mid
        else:
            lo = mid
    final = margin(hi, warm, random_starts=False)
    eta = final.direction
    control, error, singular = _extract(system, hi, eta)
    optimal_time = hi
    if settings.polish and error > 1e-12:
        polished = _polish(system, hi, eta, singular, (lo, hi), settings.tol)
        if polished is not None:
            t, direction = polished
            candidate, cand_error, _ = _extract(system, t, direction, singular)
            if cand_error < error:
                control, error, eta = candidate, cand_error, direction
                optimal_time = t
    labels = []
    if error > TERMINAL_TOL:
        logger.warning(
            f"Terminal error {error:.3g} of the extracted control exceeds"
            f" {TERMINAL_TOL}"
        )
        labels.append("terminal-error-above-tolerance")
    if singular:
        logger.info(
            f"Channels {[j + 1 for j in singular]} are singular at T*"
        )
    logger.info(
        f"Bisection optimal time {optimal_time:.9g}, terminal error"
        f" {error:.3g}"
    )
    return SolveReport(
        optimal_time=float(optimal_time),
        control=control,
        feasibility_margin=final.value,
        dual_direction=eta,
        terminal_error=error,
        method=SolveMethod.BISECTION,
        labels=labels,
        bracket=(float(lo), float(hi)),
    )



# --- Exhaustive oracle -----------------------------------------------------


def oracle_tolerance(
    system: ReducedSystem, horizon: float, segments: int, grid_step: float
) -> float:
    """Terminal-norm slack of rounding an optimal control to the q-grid

    sum_j a_j ||B_j|| (2 m T / q + grid step): each of the at most m - 1
    switches of a channel, rounded to a segment boundary, changes the
    control on at most one segment, and the run past T* lasts at most one
    grid step.
    """
    weights = system.bounds.as_array() * np.linalg.norm(
        system.coupling, axis=0
    )
    return float(
        np.sum(weights) * (2 * system.m * horizon / segments + grid_step)
    )


def brute_force_min_time(
    system: ReducedSystem,
    segments: int,
    horizons: Sequence[float],
    tolerance: Optional[float] = None,
    progress: bool = False,
) -> BruteForceResult:
    """Smallest grid horizon reached by a vertex-valued control

    For every horizon T of the grid, enumerate all (2^k)^q vertex-valued
    controls on q uniform segments, propagate exactly and record the
    smallest terminal norm. Exponential cost: k <= 2 and q <= 8 only.

    Parameters
    ----------
    system : ReducedSystem
    segments : int
        q, number of uniform segments.
    horizons : Sequence[float]
        Increasing grid of horizons.
    tolerance : Optional[float]
        Terminal-norm tolerance. Defaults to `oracle_tolerance` at each T.
    progress : bool
        Show a tqdm progress bar.

    Returns
    -------
    BruteForceResult
    """
    k = system.k
    if k > 2 or segments > 8 or segments < 1:
        utils_logging.log_and_raise(
            ValueError,
            f"Oracle limited to k <= 2 and 1 <= q <= 8 (got k={k},"
            f" q={segments})",
        )
    if (2 ** k) ** segments > ORACLE_MAX_COMBINATIONS:
        utils_logging.log_and_raise(
            ValueError, "Oracle combinatorial budget exceeded"
        )
    horizons = np.sort(np.asarray(horizons, dtype=float))
    if np.all(system.z0 == 0):
        return BruteForceResult(
            time=0.0,
            grid=horizons,
            best_norms=np.zeros(len(horizons)),
            tolerances=np.zeros(len(horizons)),
            segments=segments,
        )
    step = float(np.max(np.diff(horizons))) if len(horizons) > 1 else 0.0
    amps = system.bounds.as_array()
    vertices = np.array(list(itertools.product((-1.0, 1.0), repeat=k))) * amps
    choices = np.array(
        list(itertools.product(range(len(vertices)), repeat=segments))
    )
    best_norms, tolerances = [], []
    found = None
    for horizon in tqdm.tqdm(horizons, desc="Oracle", disable=not progress):
        edges = np.linspace(0.0, horizon, segments + 1)
        # responses[p] maps a vertex value on segment p to z(T)
        responses = np.stack(
            [
                np.column_stack(
                    [_segment_response(system, horizon, edges, j)[:, p]
                     for j in range(k)]
                )
                for p in range(segments)
            ]
        )
        per_segment = np.einsum("pmk,vk->pvm", responses, vertices)
        terminal = system.free_response(horizon) + sum(
            per_segment[p][choices[:, p]] for p in range(segments)
        )
        best = float(np.min(np.linalg.norm(terminal, axis=1)))
        tol = (
            tolerance
            if tolerance is not None
            else oracle_tolerance(system, horizon, segments, step)
        )
        best_norms.append(best)
        tolerances.append(tol)
        if found is None and best <= tol:
            found = float(horizon)
    return BruteForceResult(
        time=found,
        grid=horizons,
        best_norms=np.array(best_norms),
        tolerances=np.array(tolerances),
        segments=segments,
    )


# --- Dispatcher -------------------------------------------------------------


def solve(
    system: ReducedSystem,
    region: ControlRegion,
    settings: Optional[SolverSettings] = None,
) -> SolveReport:
    """Classify, then solve by closed form or bisection

    Raises
    ------
    NonexistenceError
        Full domain, k < m and a nonzero tail of z0.
    """
    settings = settings or SolverSettings()
    verdict = classify_existence(system, region, delta=settings.delta)
    if verdict.tag is ExistenceTag.NONEXISTENT:
        utils_logging.log_and_raise(
            NonexistenceError,
            f"No optimal control: {verdict.witness}",
            witness=verdict.witness,
        )
    if verdict.tag is ExistenceTag.ALREADY_IN_TARGET:
        return SolveReport(
            optimal_time=0.0,
            control=ControlTrajectory.zero(0.0, system.k),
            feasibility_margin=None,
            dual_direction=None,
            terminal_error=0.0,
            method=SolveMethod.CLOSED_FORM,
        )
    if verdict.tag.is_diagonal:
        return diagonal_synthesis(system)
    report = min_time_bisect(system, settings)
    if verdict.tag is ExistenceTag.UNKNOWN_EXISTENCE:
        report.labels.append("outside-theory")
    return report
