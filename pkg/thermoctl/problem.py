"""
Problem files.

A problem is a JSON document:

    {
      "domain": {"length": 1.0},
      "omega": "full" | {"intervals": [[a, b], ...]},
      "modes": {"m": 2, "k": 1, "M": 20},
      "bounds": [1.0],
      "y0": {"coefficients": [1.0, 0.5]},
      "solver": {"tol": 1e-6, "T_hi": null, "seed": 0, "delta": 1e-9,
                 "horizon_cap": 65536},
      "scan": {"x_range": [0.55, 0.95], "rho_range": [0.005, 0.05],
               "grid": [200, 20], "delta": 1e-6},
      "oracle": {"segments": 6, "horizons": [0.1, 2.0, 40]}
    }

"solver", "scan" and "oracle" are optional. Violations raise `SpecError`
with the path of the offending field.
"""
import json
import logging
import os
from dataclasses import dataclass, field
from typing import Any, List, Optional, Tuple, Union

import numpy as np

import thermoctl.utils.logging as utils_logging
from thermoctl.exceptions import SpecError
from thermoctl.genericity import ScanGrid
from thermoctl.reduced import ControlBounds, ReducedSystem, build_reduced
from thermoctl.simulator import default_truncation
from thermoctl.solver import SolverSettings
from thermoctl.spectral import ControlRegion, EigenBasis, build_interval_basis


logger = logging.getLogger(__name__)

SEED_ENV_VAR = "THERMOCTL_SEED"


def _fail(path: str, msg: str):
    utils_logging.log_and_raise(SpecError, f"{path}: {msg}", path=path)


def _get(doc: dict, key: str, path: str, required: bool = True) -> Any:
    if not isinstance(doc, dict):
        _fail(path, "expected an object")
    if key not in doc:
        if required:
            _fail(f"{path}.{key}", "missing field")
        return None
    return doc[key]


def _number(value: Any, path: str, positive: bool = False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        _fail(path, f"expected a number, got {value!r}")
    if not np.isfinite(value):
        _fail(path, "expected a finite number")
    if positive and value <= 0:
        _fail(path, f"expected a positive number, got {value}")
    return float(value)


def _integer(value: Any, path: str, minimum: int) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        _fail(path, f"expected an integer, got {value!r}")
    if value < minimum:
        _fail(path, f"expected an integer >= {minimum}, got {value}")
    return int(value)


def _numbers(value: Any, path: str, positive: bool = False) -> List[float]:
    if not isinstance(value, list):
        _fail(path, "expected a list of numbers")
    return [
        _number(v, f"{path}[{n}]", positive=positive)
        for n, v in enumerate(value)
    ]


def _pair(value: Any, path: str) -> Tuple[float, float]:
    values = _numbers(value, path)
    if len(values) != 2 or not values[0] < values[1]:
        _fail(path, f"expected an increasing pair, got {value!r}")
    return values[0], values[1]


@dataclass
class ScanSpec:
    x_range: Tuple[float, float]
    rho_range: Tuple[float, float]
    grid: Tuple[int, int] = (200, 20)
    delta: float = 1e-6


@dataclass
class OracleSpec:
    segments: int = 6
    horizons: Optional[Tuple[float, float, int]] = None


@dataclass
class ProblemSpec:
    """
    Parsed and validated problem file.

    Parameters
    ----------
    length: float
    omega: Union[str, List[Tuple[float, float]]]
        "full" or a list of intervals.
    m: int
    k: int
    truncation: int
        M, number of simulated modes.
    bounds: List[float]
    y0: List[float]
        Eigen-coefficients of the initial state.
    solver: dict
        Raw solver block.
    scan: Optional[ScanSpec]
    oracle: OracleSpec
    """

    length: float
    omega: Union[str, List[Tuple[float, float]]]
    m: int
    k: int
    truncation: int
    bounds: List[float]
    y0: List[float]
    solver: dict = field(default_factory=dict)
    scan: Optional[ScanSpec] = None
    oracle: OracleSpec = field(default_factory=OracleSpec)

    @property
    def is_full_domain(self) -> bool:
        return self.omega == "full"

    def basis(self) -> EigenBasis:
        return build_interval_basis(self.length, self.truncation)

    def region(self) -> ControlRegion:
        basis = self.basis()
        if self.is_full_domain:
            return ControlRegion.full(basis.domain)
        return ControlRegion(domain=basis.domain, intervals=tuple(self.omega))

    def full_region(self) -> ControlRegion:
        return ControlRegion.full(self.basis().domain)

    def system(self, region: Optional[ControlRegion] = None) -> ReducedSystem:
        return build_reduced(
            basis=self.basis(),
            region=region or self.region(),
            y0_coeffs=self.y0,
            m=self.m,
            k=self.k,
            bounds=ControlBounds(tuple(self.bounds)),
        )

    def settings(self, **overrides) -> SolverSettings:
        """Solver settings: overrides (non-None) > THERMOCTL_SEED > file"""
        block = self.solver
        conf = {
            "tol": block.get("tol"),
            "horizon": block.get("T_hi"),
            "horizon_cap": block.get("horizon_cap"),
            "seed": block.get("seed"),
            "delta": block.get("delta"),
            "n_random_starts": block.get("n_random_starts"),
            "max_descent_iter": block.get("max_descent_iter"),
        }
        env_seed = os.environ.get(SEED_ENV_VAR)
        if env_seed is not None:
            try:
                conf["seed"] = int(env_seed)
            except ValueError:
                _fail(SEED_ENV_VAR, f"expected an integer, got {env_seed!r}")
        conf.update({k: v for k, v in overrides.items() if v is not None})
        return SolverSettings(
            **{k: v for k, v in conf.items() if v is not None}
        )

    def scan_grid(self, delta: Optional[float] = None) -> ScanGrid:
        if self.scan is None:
            _fail("$.scan", "missing field")
        return ScanGrid.from_ranges(
            x_range=self.scan.x_range,
            rho_range=self.scan.rho_range,
            shape=self.scan.grid,
            delta=delta or self.scan.delta,
            m=self.m,
            k=self.k,
        )

    def to_dict(self) -> dict:
        doc = {
            "domain": {"length": self.length},
            "omega": (
                "full"
                if self.is_full_domain
                else {"intervals": [list(iv) for iv in self.omega]}
            ),
            "modes": {"m": self.m, "k": self.k, "M": self.truncation},
            "bounds": self.bounds,
            "y0": {"coefficients": self.y0},
            "solver": self.solver,
        }
        if self.scan is not None:
            doc["scan"] = {
                "x_range": list(self.scan.x_range),
                "rho_range": list(self.scan.rho_range),
                "grid": list(self.scan.grid),
                "delta": self.scan.delta,
            }
        doc["oracle"] = {"segments": self.oracle.segments}
        if self.oracle.horizons is not None:
            doc["oracle"]["horizons"] = list(self.oracle.horizons)
        return doc


def _parse_omega(value: Any, length: float):
    path = "$.omega"
    if value == "full":
        return "full"
    intervals = _get(value, "intervals", path)
    if not isinstance(intervals, list) or len(intervals) == 0:
        _fail(f"{path}.intervals", "expected a non-empty list of intervals")
    parsed = []
    for n, interval in enumerate(intervals):
        a, b = _pair(interval, f"{path}.intervals[{n}]")
        if a < 0 or b > length:
            _fail(
                f"{path}.intervals[{n}]",
                f"interval ({a}, {b}) not inside (0, {length})",
            )
        parsed.append((a, b))
    return parsed


def _parse_solver(value: Any) -> dict:
    path = "$.solver"
    if value is None:
        return {}
    if not isinstance(value, dict):
        _fail(path, "expected an object")
    checks = {
        "tol": lambda v, p: _number(v, p, positive=True),
        "T_hi": lambda v, p: None if v is None else _number(v, p, True),
        "horizon_cap": lambda v, p: _number(v, p, positive=True),
        "seed": lambda v, p: _integer(v, p, minimum=0),
        "delta": lambda v, p: _number(v, p, positive=True),
        "n_random_starts": lambda v, p: _integer(v, p, minimum=0),
        "max_descent_iter": lambda v, p: _integer(v, p, minimum=1),
    }
    block = {}
    for key, item in value.items():
        if key not in checks:
            _fail(f"{path}.{key}", "unknown field")
        block[key] = checks[key](item, f"{path}.{key}")
    return block


def _parse_scan(value: Any) -> Optional[ScanSpec]:
    path = "$.scan"
    if value is None:
        return None
    grid = _get(value, "grid", path, required=False) or [200, 20]
    if not isinstance(grid, list) or len(grid) != 2:
        _fail(f"{path}.grid", "expected [n_x, n_rho]")
    delta = _get(value, "delta", path, required=False)
    return ScanSpec(
        x_range=_pair(_get(value, "x_range", path), f"{path}.x_range"),
        rho_range=_pair(_get(value, "rho_range", path), f"{path}.rho_range"),
        grid=(
            _integer(grid[0], f"{path}.grid[0]", minimum=1),
            _integer(grid[1], f"{path}.grid[1]", minimum=1),
        ),
        delta=1e-6 if delta is None else _number(
            delta, f"{path}.delta", positive=True
        ),
    )


def _parse_oracle(value: Any) -> OracleSpec:
    path = "$.oracle"
    if value is None:
        return OracleSpec()
    segments = _get(value, "segments", path, required=False)
    horizons = _get(value, "horizons", path, required=False)
    spec = OracleSpec()
    if segments is not None:
        spec.segments = _integer(segments, f"{path}.segments", minimum=1)
    if horizons is not None:
        if not isinstance(horizons, list) or len(horizons) != 3:
            _fail(f"{path}.horizons", "expected [T_min, T_max, count]")
        lo, hi = _pair(horizons[:2], f"{path}.horizons")
        count = _integer(horizons[2], f"{path}.horizons[2]", minimum=2)
        spec.horizons = (lo, hi, count)
    return spec


def parse_problem(doc: Any) -> ProblemSpec:
    """Validate a decoded JSON document into a ProblemSpec

    Raises
    ------
    SpecError
        With the path of the first offending field, e.g. "$.modes.m".
    """
    if not isinstance(doc, dict):
        _fail("$", "expected a JSON object")
    domain = _get(doc, "domain", "$")
    length = _number(
        _get(domain, "length", "$.domain"), "$.domain.length", positive=True
    )
    omega = _parse_omega(_get(doc, "omega", "$"), length)
    modes = _get(doc, "modes", "$")
    m = _integer(_get(modes, "m", "$.modes"), "$.modes.m", minimum=2)
    k = _integer(_get(modes, "k", "$.modes"), "$.modes.k", minimum=1)
    truncation = _get(modes, "M", "$.modes", required=False)
    if truncation is None:
        truncation = max(default_truncation(m), k)
    truncation = _integer(truncation, "$.modes.M", minimum=max(m, k))
    bounds = _numbers(_get(doc, "bounds", "$"), "$.bounds", positive=True)
    if len(bounds) != k:
        _fail("$.bounds", f"expected {k} bounds, got {len(bounds)}")
    y0 = _numbers(
        _get(_get(doc, "y0", "$"), "coefficients", "$.y0"),
        "$.y0.coefficients",
    )
    return ProblemSpec(
        length=length,
        omega=omega,
        m=m,
        k=k,
        truncation=truncation,
        bounds=bounds,
        y0=y0,
        solver=_parse_solver(doc.get("solver")),
        scan=_parse_scan(doc.get("scan")),
        oracle=_parse_oracle(doc.get("oracle")),
    )


def load_problem(path: str) -> ProblemSpec:
    """Read and validate a problem file"""
    try:
        with open(path) as f:
            doc = json.load(f)
    except json.JSONDecodeError as e:
        _fail("$", f"malformed JSON ({e.msg} at line {e.lineno})")
    except OSError as e:
        _fail("$", f"cannot read {path} ({e.strerror})")
    logger.debug(f"Loaded problem {path}")
    return parse_problem(doc)
