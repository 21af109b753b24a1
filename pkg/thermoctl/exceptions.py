"""
Exceptions raised by thermoctl.

Plain argument errors use the builtin ValueError; the classes below carry
the extra context the CLI needs to pick an exit code or a diagnostic.
"""
from typing import Optional


class PreconditionError(ValueError):
    """An operation was called on an instance it is not defined for."""


class NonexistenceError(ValueError):
    """The problem has no optimal control (full domain, k < m, tail != 0)."""

    def __init__(self, msg: str, witness: Optional[str] = None):
        super().__init__(msg)
        self.witness = witness


class InfeasibleHorizonError(RuntimeError):
    """Zero was not reachable at any horizon up to the doubling cap."""

    def __init__(self, msg: str, horizon: Optional[float] = None):
        super().__init__(msg)
        self.horizon = horizon


class SphereConvergenceError(RuntimeError):
    """No multi-start descent on the unit sphere converged."""

    def __init__(self, msg: str, restarts: int = 0):
        super().__init__(msg)
        self.restarts = restarts


class RootFindingError(RuntimeError):
    """Bracketed root refinement of a switching function failed."""


class EmptyScanError(RuntimeError):
    """No grid point of a genericity scan lies in the admissible set."""


class SpecError(ValueError):
    """Invalid problem file, with the offending JSON field path."""

    def __init__(self, msg: str, path: str = ""):
        super().__init__(msg)
        self.path = path
