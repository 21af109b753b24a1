"""
Spatial domain, Dirichlet eigensystem and control region.

The domain is the interval (0, L). Its Dirichlet eigenpairs are known in
closed form, so every inner product <chi_omega xi_i, xi_j> is evaluated with
the exact antiderivative of a product of sines.
"""
import logging
from dataclasses import dataclass
from typing import Iterable, Sequence, Tuple

import numpy as np

import thermoctl.utils.logging as utils_logging


logger = logging.getLogger(__name__)

_NORMALIZATION_PANELS = 64
_NORMALIZATION_NODES = 16


@dataclass(frozen=True)
class DomainSpec:
    """Interval domain (0, length)."""

    length: float

    def __post_init__(self):
        if not np.isfinite(self.length) or self.length <= 0:
            utils_logging.log_and_raise(
                ValueError,
                f"Domain length should be positive, got {self.length}",
            )


@dataclass(frozen=True)
class EigenBasis:
    """
    Truncated Dirichlet eigensystem of -d^2/dx^2 on (0, L).

    Modes are indexed from 1: xi_i(x) = sqrt(2/L) sin(i pi x / L), with
    eigenvalue lambda_i = (i pi / L)^2.

    Parameters
    ----------
    domain: DomainSpec
        Spatial domain.
    truncation: int
        Number of modes M kept.
    """

    domain: DomainSpec
    truncation: int

    def __post_init__(self):
        if int(self.truncation) != self.truncation or self.truncation < 1:
            utils_logging.log_and_raise(
                ValueError,
                f"Truncation should be a positive integer, got"
                f" {self.truncation}",
            )

    @property
    def length(self) -> float:
        return self.domain.length

    @property
    def eigenvalues(self) -> np.ndarray:
        """lambda_1..lambda_M, strictly increasing."""
        idx = np.arange(1, self.truncation + 1, dtype=float)
        return (idx * np.pi / self.length) ** 2

    def check_index(self, i: int) -> None:
        if not 1 <= i <= self.truncation:
            utils_logging.log_and_raise(
                ValueError,
                f"Mode index {i} outside 1..{self.truncation}",
            )

    def evaluate(self, i: int, x) -> np.ndarray:
        """Value of xi_i at the points `x`."""
        self.check_index(i)
        x = np.asarray(x, dtype=float)
        return np.sqrt(2.0 / self.length) * np.sin(
            i * np.pi * x / self.length
        )

    def normalization_error(self) -> float:
        """Max deviation of ||xi_i||^2 from 1, by composite Gauss-Legendre."""
        nodes, weights = np.polynomial.legendre.leggauss(_NORMALIZATION_NODES)
        edges = np.linspace(0.0, self.length, _NORMALIZATION_PANELS + 1)
        half = 0.5 * np.diff(edges)
        mid = 0.5 * (edges[1:] + edges[:-1])
        x = (mid[:, None] + half[:, None] * nodes[None, :]).ravel()
        w = (half[:, None] * weights[None, :]).ravel()
        errors = [
            abs(np.sum(w * self.evaluate(i, x) ** 2) - 1.0)
            for i in range(1, self.truncation + 1)
        ]
        return float(max(errors))


@dataclass(frozen=True)
class ControlRegion:
    """
    Control region omega: a finite union of open subintervals of (0, L).

    Intervals are sorted and merged on construction (touching intervals
    included, since they differ from their union by a null set). Use
    `ControlRegion.full(domain)` for omega = Omega.
    """

    domain: DomainSpec
    intervals: Tuple[Tuple[float, float], ...]

    def __post_init__(self):
        object.__setattr__(
            self,
            "intervals",
            _normalize_intervals(self.intervals, self.domain),
        )

    @classmethod
    def full(cls, domain: DomainSpec) -> "ControlRegion":
        return cls(domain=domain, intervals=((0.0, domain.length),))

    @property
    def is_full_domain(self) -> bool:
        """Exact endpoint comparison after normalization."""
        return self.intervals == ((0.0, float(self.domain.length)),)

    @property
    def measure(self) -> float:
        return float(sum(b - a for a, b in self.intervals))

    def closure_contains(self, x: float) -> bool:
        return any(a <= x <= b for a, b in self.intervals)

    def distance_to_closure(self, lo: float, hi: float) -> float:
        """Distance between the segment [lo, hi] and the closure of omega."""
        distances = []
        for a, b in self.intervals:
            if hi < a:
                distances.append(a - hi)
            elif lo > b:
                distances.append(lo - b)
            else:
                distances.append(0.0)
        return float(min(distances))

    def with_ball(self, x: float, rho: float) -> "ControlRegion":
        """omega union (x - rho, x + rho)."""
        return ControlRegion(
            domain=self.domain,
            intervals=self.intervals + ((x - rho, x + rho),),
        )

    def to_json(self):
        if self.is_full_domain:
            return "full"
        return {"intervals": [list(iv) for iv in self.intervals]}


def _normalize_intervals(
    intervals: Iterable[Sequence[float]], domain: DomainSpec
) -> Tuple[Tuple[float, float], ...]:
    """Sort, validate and merge intervals"""
    cleaned = []
    for interval in intervals:
        if len(interval) != 2:
            utils_logging.log_and_raise(
                ValueError, f"Interval should have two endpoints: {interval}"
            )
        a, b = float(interval[0]), float(interval[1])
        if not b > a:
            utils_logging.log_and_raise(
                ValueError, f"Zero-length or reversed interval ({a}, {b})"
            )
        if a < 0 or b > domain.length:
            utils_logging.log_and_raise(
                ValueError,
                f"Interval ({a}, {b}) not inside (0, {domain.length})",
            )
        cleaned.append((a, b))
    if len(cleaned) == 0:
        utils_logging.log_and_raise(
            ValueError, "Control region needs at least one interval"
        )
    cleaned.sort()
    merged = [cleaned[0]]
    for a, b in cleaned[1:]:
        last_a, last_b = merged[-1]
        if a <= last_b:
            merged[-1] = (last_a, max(last_b, b))
        else:
            merged.append((a, b))
    return tuple(merged)


def build_interval_basis(length: float, truncation: int) -> EigenBasis:
    """Dirichlet eigensystem of (0, `length`) truncated to `truncation` modes

    Parameters
    ----------
    length : float
        Domain length L > 0.
    truncation : int
        Number of modes M >= 1.

    Returns
    -------
    EigenBasis
    """
    return EigenBasis(domain=DomainSpec(length=length), truncation=truncation)


def _cos_integral(c: np.ndarray, a: float, b: float) -> np.ndarray:
    """int_a^b cos(c x) dx, elementwise in c."""
    safe_c = np.where(c == 0, 1.0, c)
    value = (np.sin(safe_c * b) - np.sin(safe_c * a)) / safe_c
    return np.where(c == 0, b - a, value)


def interval_products(
    length: float, a: float, b: float, n_rows: int, n_cols: int
) -> np.ndarray:
    """Matrix of int_a^b xi_i xi_j dx for i <= n_rows, j <= n_cols.

    Uses the product-to-sum identity
    2 sin(p x) sin(q x) = cos((p - q) x) - cos((p + q) x). The difference
    frequency is built from |i - j|, so the result is exactly symmetric.
    """
    i = np.arange(1, n_rows + 1)[:, None]
    j = np.arange(1, n_cols + 1)[None, :]
    w = np.pi / length
    diff = np.abs(i - j) * w
    summ = (i + j) * w
    return (_cos_integral(diff, a, b) - _cos_integral(summ, a, b)) / length


def control_coupling(
    basis: EigenBasis, region: ControlRegion, i: int, j: int
) -> float:
    """<chi_omega xi_i, xi_j>, summed over the intervals of omega"""
    basis.check_index(i)
    basis.check_index(j)
    if region.is_full_domain:
        return 1.0 if i == j else 0.0
    total = 0.0
    for a, b in region.intervals:
        total += interval_products(basis.length, a, b, i, j)[i - 1, j - 1]
    return float(total)


def coupling_matrix(
    basis: EigenBasis, region: ControlRegion, m: int, k: int
) -> np.ndarray:
    """Coupling matrix B with B[i-1, j-1] = <chi_omega xi_i, xi_j>

    For omega = Omega the exact block form is returned: identity stacked on
    zeros when k < m, (I, 0) when k >= m.

    Parameters
    ----------
    basis : EigenBasis
    region : ControlRegion
    m : int
        Number of rows (state modes), at most the truncation.
    k : int
        Number of columns (control channels), at most the truncation.

    Returns
    -------
    np.ndarray
        m x k matrix.
    """
    if m < 1 or k < 1 or m > basis.truncation or k > basis.truncation:
        utils_logging.log_and_raise(
            ValueError,
            f"Coupling dimensions ({m}, {k}) exceed truncation"
            f" {basis.truncation}",
        )
    if region.is_full_domain:
        return np.eye(m, k)
    matrix = np.zeros((m, k))
    for a, b in region.intervals:
        matrix += interval_products(basis.length, a, b, m, k)
    return matrix
