"""
Genericity of control regions: ball augmentations omega U B_rho(x) that make
every coupling <chi xi_i, xi_j> nonzero.

A grid of (x, rho) is scanned; at each admissible point the couplings of the
augmented region are computed in closed form and compared to a margin.
"""
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
import pandas as pd
import sklearn.model_selection
import tqdm

import thermoctl.utils.logging as utils_logging
from thermoctl.exceptions import EmptyScanError, PreconditionError
from thermoctl.spectral import (
    ControlRegion,
    DomainSpec,
    EigenBasis,
    control_coupling,
    coupling_matrix,
    interval_products,
)


logger = logging.getLogger(__name__)

DEFAULT_N_CANDIDATES = 10


def _check_ball(basis: EigenBasis, x: float, rho: float):
    """closure(B_rho(x)) inside (0, L)"""
    if not (rho > 0 and x - rho > 0 and x + rho < basis.length):
        utils_logging.log_and_raise(
            ValueError,
            f"Ball ({x - rho}, {x + rho}) is not compactly inside"
            f" (0, {basis.length})",
        )


def ball_integral(
    basis: EigenBasis, x: float, rho: float, i: int, j: int
) -> float:
    """int_{x - rho}^{x + rho} xi_i xi_j"""
    basis.check_index(i)
    basis.check_index(j)
    _check_ball(basis, x, rho)
    return float(
        interval_products(basis.length, x - rho, x + rho, i, j)[i - 1, j - 1]
    )


def fij(basis: EigenBasis, i: int, j: int, x: float, rho: float) -> float:
    """F_ij(x, rho): mean-scaled integral of xi_i xi_j over B_rho(x)

    In 1D this is (1 / rho) int_{x - rho}^{x + rho} xi_i xi_j.
    """
    return ball_integral(basis, x, rho, i, j) / rho


def fij_dx(basis: EigenBasis, i: int, j: int, x: float, rho: float) -> float:
    """Analytic x-derivative of F_ij(x, rho)"""
    _check_ball(basis, x, rho)

    def product(t):
        return float(basis.evaluate(i, t) * basis.evaluate(j, t))

    return (product(x + rho) - product(x - rho)) / rho


def omega_rho_membership(
    x: float, rho: float, domain: DomainSpec, region: ControlRegion
) -> bool:
    """Is x in Omega^rho?

    True iff x is outside the closure of omega, and the closed ball
    [x - rho, x + rho] keeps a positive distance both from the boundary of
    Omega and from the closure of omega.
    """
    if rho <= 0:
        return False
    if not 0 < x < domain.length or region.closure_contains(x):
        return False
    lo, hi = x - rho, x + rho
    if not (lo > 0 and hi < domain.length):
        return False
    return region.distance_to_closure(lo, hi) > 0


def _check_membership(basis, region, x, rho):
    if not omega_rho_membership(x, rho, basis.domain, region):
        utils_logging.log_and_raise(
            PreconditionError,
            f"(x, rho) = ({x}, {rho}) is not in Omega^rho for {region}",
        )


def augmented_coupling(
    basis: EigenBasis,
    region: ControlRegion,
    x: float,
    rho: float,
    i: int,
    j: int,
) -> float:
    """<chi_{omega U B_rho(x)} xi_i, xi_j> for a ball disjoint from omega"""
    _check_membership(basis, region, x, rho)
    return control_coupling(basis, region, i, j) + ball_integral(
        basis, x, rho, i, j
    )


def augmented_coupling_matrix(
    basis: EigenBasis,
    region: ControlRegion,
    x: float,
    rho: float,
    m: int,
    k: int,
) -> np.ndarray:
    """m x k coupling matrix of omega U B_rho(x)"""
    _check_membership(basis, region, x, rho)
    return coupling_matrix(basis, region, m, k) + interval_products(
        basis.length, x - rho, x + rho, m, k
    )


@dataclass
class ScanGrid:
    """
    Sampling of (x, rho) for the augmentation scan.

    Parameters
    ----------
    xs: np.ndarray
        Ball centers.
    rhos: np.ndarray
        Positive radii.
    delta: float
        Margin that every augmented coupling must exceed.
    m: int
        State modes tested (rows i <= m).
    k: int
        Control channels; columns j <= max(k, m) are tested.
    """

    xs: np.ndarray
    rhos: np.ndarray
    delta: float = 1e-6
    m: int = 2
    k: int = 1

    def __post_init__(self):
        self.xs = np.atleast_1d(np.asarray(self.xs, dtype=float))
        self.rhos = np.atleast_1d(np.asarray(self.rhos, dtype=float))
        if len(self.xs) == 0 or len(self.rhos) == 0:
            raise ValueError("Scan grid needs at least one x and one rho")
        if np.any(self.rhos <= 0):
            raise ValueError("Scan radii should be positive")
        if self.delta <= 0:
            raise ValueError(f"delta should be positive, got {self.delta}")
        if self.m < 1 or self.k < 1:
            raise ValueError(f"Invalid mode ranges m={self.m}, k={self.k}")

    @classmethod
    def from_ranges(
        cls,
        x_range: Tuple[float, float],
        rho_range: Tuple[float, float],
        shape: Tuple[int, int],
        delta: float = 1e-6,
        m: int = 2,
        k: int = 1,
    ) -> "ScanGrid":
        """Uniform grid with shape[0] centers and shape[1] radii"""
        return cls(
            xs=np.linspace(x_range[0], x_range[1], shape[0]),
            rhos=np.linspace(rho_range[0], rho_range[1], shape[1]),
            delta=delta,
            m=m,
            k=k,
        )

    @property
    def columns(self) -> int:
        return max(self.k, self.m)

    def points(self) -> sklearn.model_selection.ParameterGrid:
        return sklearn.model_selection.ParameterGrid(
            param_grid={"x": self.xs, "rho": self.rhos}
        )

    def to_dict(self) -> dict:
        return {
            "x": [float(self.xs[0]), float(self.xs[-1]), len(self.xs)],
            "rho": [float(self.rhos[0]), float(self.rhos[-1]), len(self.rhos)],
            "delta": self.delta,
            "m": self.m,
            "k": self.k,
        }


@dataclass
class Candidate:
    x: float
    rho: float
    min_magnitude: float

    def to_dict(self) -> dict:
        return {
            "x": self.x,
            "rho": self.rho,
            "min_magnitude": self.min_magnitude,
        }


@dataclass
class ScanResult:
    """
    Outcome of an augmentation scan.

    Parameters
    ----------
    table: pd.DataFrame
        One row per grid point: x, rho, admissible, min_magnitude (NaN when
        not admissible).
    zero_set_fraction: float
        Share of admissible points whose smallest augmented coupling is
        <= delta.
    candidates: List[Candidate]
        Admissible points with every augmented coupling > delta, best margin
        first.
    delta: float
    """

    table: pd.DataFrame
    zero_set_fraction: float
    candidates: List[Candidate] = field(default_factory=list)
    delta: float = 1e-6

    @property
    def best(self) -> Optional[Candidate]:
        return self.candidates[0] if self.candidates else None

    def to_dict(self) -> dict:
        return {
            "delta": self.delta,
            "admissible_points": int(self.table["admissible"].sum()),
            "zero_set_fraction": self.zero_set_fraction,
            "candidates": [c.to_dict() for c in self.candidates],
        }


def scan(
    basis: EigenBasis,
    region: ControlRegion,
    grid: ScanGrid,
    n_candidates: int = DEFAULT_N_CANDIDATES,
    progress: bool = False,
) -> ScanResult:
    """Scan (x, rho) for ball augmentations satisfying (D2) with margin

    Every grid point passing `omega_rho_membership` gets the augmented
    couplings for i <= m, j <= max(k, m); the smallest magnitude is
    recorded.

    Parameters
    ----------
    basis : EigenBasis
        Truncation >= max(m, k).
    region : ControlRegion
    grid : ScanGrid
    n_candidates : int
        Length of the ranked candidate list.
    progress : bool
        Show a tqdm progress bar.

    Returns
    -------
    ScanResult

    Raises
    ------
    EmptyScanError
        No grid point belongs to Omega^rho.
    """
    base = coupling_matrix(basis, region, grid.m, grid.columns)
    records = []
    for point in tqdm.tqdm(
        grid.points(), desc="Scan", disable=not progress
    ):
        x, rho = float(point["x"]), float(point["rho"])
        admissible = omega_rho_membership(x, rho, basis.domain, region)
        magnitude = np.nan
        if admissible:
            augmented = base + interval_products(
                basis.length, x - rho, x + rho, grid.m, grid.columns
            )
            magnitude = float(np.min(np.abs(augmented)))
        records.append(
            {
                "x": x,
                "rho": rho,
                "admissible": admissible,
                "min_magnitude": magnitude,
            }
        )
    table = pd.DataFrame.from_records(records)
    admissible = table[table["admissible"]]
    if admissible.empty:
        utils_logging.log_and_raise(
            EmptyScanError, "Omega^rho is empty at every sampled (x, rho)"
        )
    below = admissible["min_magnitude"] <= grid.delta
    zero_set_fraction = float(below.mean())
    certified = admissible[~below].sort_values(
        by="min_magnitude", ascending=False, kind="mergesort"
    )
    candidates = [
        Candidate(
            x=float(row.x), rho=float(row.rho),
            min_magnitude=float(row.min_magnitude),
        )
        for row in certified.head(n_candidates).itertuples()
    ]
    logger.info(
        f"Scanned {len(table)} points, {len(admissible)} admissible,"
        f" {len(candidates)} candidates, zero-set fraction"
        f" {zero_set_fraction:.3g}"
    )
    return ScanResult(
        table=table,
        zero_set_fraction=zero_set_fraction,
        candidates=candidates,
        delta=grid.delta,
    )


def check_candidate(
    basis: EigenBasis,
    region: ControlRegion,
    candidate: Candidate,
    m: int,
    k: int,
) -> Tuple[ControlRegion, np.ndarray]:
    """Augmented region of a candidate and its rebuilt coupling matrix"""
    augmented = region.with_ball(candidate.x, candidate.rho)
    return augmented, coupling_matrix(basis, augmented, m, k)

