"""
Structural conditions of the time-optimal control problem.

Decides the nonvanishing-tail condition of the full-domain dichotomy,
(D1), (D2), (D2~), Kalman rank, the Vandermonde product identity, the
general position condition of the box U, and the existence classification.
"""
import enum
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

import thermoctl.utils.logging as utils_logging
from thermoctl.exceptions import PreconditionError
from thermoctl.reduced import ReducedSystem
from thermoctl.spectral import ControlRegion


logger = logging.getLogger(__name__)

DEFAULT_DELTA = 1e-9
D1_RELATIVE_GAP = 1e-12


class ExistenceTag(enum.Enum):
    NONEXISTENT = "NONEXISTENT"
    EXISTS_DIAGONAL_REDUCED = "EXISTS_DIAGONAL_REDUCED"
    EXISTS_DIAGONAL_FULL = "EXISTS_DIAGONAL_FULL"
    EXISTS_PROPER_REGION = "EXISTS_PROPER_REGION"
    ALREADY_IN_TARGET = "ALREADY_IN_TARGET"
    UNKNOWN_EXISTENCE = "UNKNOWN_EXISTENCE"

    @property
    def exists(self) -> bool:
        return (
            self.value.startswith("EXISTS")
            or self is ExistenceTag.ALREADY_IN_TARGET
        )

    @property
    def is_diagonal(self) -> bool:
        return self in (
            ExistenceTag.EXISTS_DIAGONAL_REDUCED,
            ExistenceTag.EXISTS_DIAGONAL_FULL,
        )


@dataclass
class ExistenceVerdict:
    """
    Existence classification of an instance.

    Parameters
    ----------
    tag: ExistenceTag
    witness: Optional[str]
        Human-readable reason, e.g. the nonzero tail of z0 for NONEXISTENT,
        or "unknown-existence" when no sufficient condition applies.
    details: dict
        Raw condition data (D1, D2 failing pairs, D2~, Kalman rank).
    """

    tag: ExistenceTag
    witness: Optional[str] = None
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "tag": self.tag.value,
            "witness": self.witness,
            "details": self.details,
        }


@dataclass
class D2Check:
    passed: bool
    failing: List[Tuple[int, int]]

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "failing": [list(p) for p in self.failing],
        }


@dataclass
class GeneralPositionVerdict:
    """Per-column general position verdicts and |F_j| product values"""

    columns: List[bool]
    products: List[float]

    @property
    def passed(self) -> bool:
        return all(self.columns)

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "columns": self.columns,
            "products": self.products,
        }


def check_w21(z0: Sequence[float], k: int) -> bool:
    """Is (z0_{k+1}, ..., z0_m) nonzero?

    Exact comparison, no tolerance. Vacuous (False) when k >= m.
    """
    z0 = np.asarray(z0, dtype=float)
    if k >= len(z0):
        return False
    return bool(np.any(z0[k:] != 0))


def check_D1(
    eigenvalues: Sequence[float], m: int, rel_gap: float = D1_RELATIVE_GAP
) -> bool:
    """Are lambda_1 < ... < lambda_m separated by a relative gap > rel_gap?"""
    lams = np.asarray(eigenvalues, dtype=float)
    if m > len(lams):
        utils_logging.log_and_raise(
            ValueError, f"m = {m} exceeds the {len(lams)} eigenvalues given"
        )
    lams = lams[:m]
    gaps = np.diff(lams)
    scale = np.maximum(np.abs(lams[1:]), np.finfo(float).tiny)
    return bool(np.all(gaps > rel_gap * scale))


def check_D2(coupling: np.ndarray, delta: float = DEFAULT_DELTA) -> D2Check:
    """|B_ij| > delta for all i <= m, j <= k, with all failing pairs.

    Pairs are reported 1-based as (i, j).
    """
    coupling = np.atleast_2d(coupling)
    rows, cols = np.nonzero(np.abs(coupling) <= delta)
    failing = [(int(i) + 1, int(j) + 1) for i, j in zip(rows, cols)]
    return D2Check(passed=len(failing) == 0, failing=failing)


def check_D2_tilde(coupling: np.ndarray, delta: float = DEFAULT_DELTA) -> bool:
    """|B_i1| > delta for every row i"""
    coupling = np.atleast_2d(coupling)
    return bool(np.all(np.abs(coupling[:, 0]) > delta))


def controllability_matrix(
    drift: np.ndarray, inputs: np.ndarray
) -> np.ndarray:
    """(B, AB, ..., A^{d-1} B)"""
    drift = np.atleast_2d(drift)
    inputs = np.asarray(inputs, dtype=float)
    if inputs.ndim == 1:
        inputs = inputs[:, None]
    d = drift.shape[0]
    if drift.shape != (d, d) or inputs.shape[0] != d:
        utils_logging.log_and_raise(
            ValueError,
            f"Incompatible shapes A {drift.shape} and B {inputs.shape}",
        )
    blocks = [inputs]
    for _ in range(d - 1):
        blocks.append(drift @ blocks[-1])
    return np.hstack(blocks)


def kalman_rank(drift: np.ndarray, inputs: np.ndarray) -> int:
    """Numerical rank of the controllability matrix

    Columns are scaled to unit norm (zero columns dropped), then the
    diagonal of a column-pivoted QR is thresholded at
    max(d, d * l) * eps * (largest column norm, i.e. 1).

    Parameters
    ----------
    drift : np.ndarray
        d x d matrix A.
    inputs : np.ndarray
        d x l matrix B.

    Returns
    -------
    int
    """
    ctrb = controllability_matrix(drift, inputs)
    norms = np.linalg.norm(ctrb, axis=0)
    ctrb = ctrb[:, norms > 0] / norms[norms > 0]
    if ctrb.shape[1] == 0:
        return 0
    _, r, _ = scipy.linalg.qr(ctrb, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    threshold = max(ctrb.shape) * np.finfo(float).eps
    return int(np.sum(diag > threshold))


def vandermonde_determinant(
    eigenvalues: Sequence[float], column: Sequence[float]
) -> float:
    """prod_i col_i * prod_{k > l} (lambda_k - lambda_l)

    Closed form of det(col, A col, ..., A^{m-1} col) for A = diag(lambda).
    """
    lams = np.asarray(eigenvalues, dtype=float)
    col = np.asarray(column, dtype=float)
    if lams.shape != col.shape:
        utils_logging.log_and_raise(
            ValueError, "Eigenvalues and column should have the same length"
        )
    product = float(np.prod(col))
    for k in range(len(lams)):
        for l in range(k):
            product *= lams[k] - lams[l]
    return product


def controllability_determinant(
    eigenvalues: Sequence[float], column: Sequence[float]
) -> float:
    """Numeric det(col, A col, ..., A^{m-1} col), A = diag(eigenvalues)"""
    lams = np.asarray(eigenvalues, dtype=float)
    return float(
        np.linalg.det(controllability_matrix(np.diag(lams), column))
    )


def general_position(
    drift: np.ndarray, coupling: np.ndarray, delta: float = DEFAULT_DELTA
) -> GeneralPositionVerdict:
    """General position of the box U with respect to (A, B)

    The box edges are the coordinate directions e_j, so the condition
    reduces to F_j = det(B_j, A B_j, ..., A^{m-1} B_j) != 0 for every
    column j. A column passes when each factor of the product formula is
    nonzero at its threshold: every |B_ij| > delta and (D1) holds.

    Parameters
    ----------
    drift : np.ndarray
        Diagonal m x m matrix A.
    coupling : np.ndarray
        m x k coupling matrix B.
    delta : float
        Threshold on the coupling entries.

    Returns
    -------
    GeneralPositionVerdict
    """
    drift = np.atleast_2d(drift)
    lams = np.diag(drift)
    if np.count_nonzero(drift - np.diag(lams)) != 0:
        utils_logging.log_and_raise(
            PreconditionError, "general_position expects a diagonal drift"
        )
    coupling = np.atleast_2d(coupling)
    simple = check_D1(lams, len(lams))
    columns, products = [], []
    for j in range(coupling.shape[1]):
        col = coupling[:, j]
        columns.append(bool(simple and np.all(np.abs(col) > delta)))
        products.append(abs(vandermonde_determinant(lams, col)))
    return GeneralPositionVerdict(columns=columns, products=products)


def classify_existence(
    system: ReducedSystem,
    region: ControlRegion,
    delta: float = DEFAULT_DELTA,
) -> ExistenceVerdict:
    """Existence classification of the time-optimal control problem

    - z0 = 0: ALREADY_IN_TARGET.
    - omega = Omega, k < m, tail of z0 nonzero: NONEXISTENT.
    - omega = Omega, k < m, tail zero: EXISTS_DIAGONAL_REDUCED.
    - omega = Omega, k >= m: EXISTS_DIAGONAL_FULL.
    - proper omega with (D1) and (D2) or (D2~): EXISTS_PROPER_REGION.
    - otherwise UNKNOWN_EXISTENCE, witness "unknown-existence".

    Parameters
    ----------
    system : ReducedSystem
    region : ControlRegion
        Region the coupling matrix was built from.
    delta : float
        Threshold for (D2) and (D2~).

    Returns
    -------
    ExistenceVerdict
    """
    m, k = system.m, system.k
    if np.all(system.z0 == 0):
        return ExistenceVerdict(
            tag=ExistenceTag.ALREADY_IN_TARGET, witness="z0 = 0"
        )
    if region.is_full_domain:
        if k < m:
            if check_w21(system.z0, k):
                tail = system.z0[k:].tolist()
                return ExistenceVerdict(
                    tag=ExistenceTag.NONEXISTENT,
                    witness=(
                        f"(<y0,xi_{k + 1}>, ..., <y0,xi_{m}>) = {tail} != 0"
                        f" with k = {k} < m = {m}"
                    ),
                    details={"tail": tail},
                )
            return ExistenceVerdict(
                tag=ExistenceTag.EXISTS_DIAGONAL_REDUCED,
                witness=f"tail of z0 beyond mode {k} vanishes",
            )
        return ExistenceVerdict(
            tag=ExistenceTag.EXISTS_DIAGONAL_FULL,
            witness=f"k = {k} >= m = {m}",
        )
    d1 = check_D1(system.eigenvalues, m)
    d2 = check_D2(system.coupling, delta=delta)
    d2_tilde = check_D2_tilde(system.coupling, delta=delta)
    details = {
        "D1": d1,
        "D2": d2.passed,
        "D2_failing": [list(p) for p in d2.failing],
        "D2_tilde": d2_tilde,
        "kalman_rank": kalman_rank(system.drift, system.coupling),
    }
    if d1 and (d2.passed or d2_tilde):
        return ExistenceVerdict(
            tag=ExistenceTag.EXISTS_PROPER_REGION,
            witness="(D1) and (D2)" if d2.passed else "(D1) and (D2~)",
            details=details,
        )
    logger.info(
        "Proper region fails (D2) and (D2~): existence is not decided"
    )
    return ExistenceVerdict(
        tag=ExistenceTag.UNKNOWN_EXISTENCE,
        witness="unknown-existence",
        details=details,
    )
