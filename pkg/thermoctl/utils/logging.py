"""
Logging utils
"""
import logging

logger = logging.getLogger(__name__)


def log_and_raise(exception, msg, **attrs):
    """
    Log an error and raise `exception` with the same `msg` message.

    Arguments
    ---------
    exception: exception type (ValueError, TypeError...)

    msg: str

    attrs:
        Extra keyword arguments forwarded to the exception constructor
        (e.g. `path` for `SpecError`, `restarts` for
        `SphereConvergenceError`).
    """
    logger.error(msg=msg)
    raise exception(msg, **attrs)
