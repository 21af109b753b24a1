import pytest

from thermoctl.problem import SEED_ENV_VAR

collect_ignore = ["setup.py"]


def pytest_addoption(parser):
    parser.addoption(
        "--runslow",
        action="store_true",
        default=False,
        help="run slow tests (solver sweeps, oracle, scans)",
    )


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: mark test as slow to run")
    config.addinivalue_line(
        "markers", "unit: implementation detail, not public API"
    )


@pytest.fixture(autouse=True)
def _no_seed_override(monkeypatch):
    """Problem files and flags set the seed, not the caller's environment"""
    monkeypatch.delenv(SEED_ENV_VAR, raising=False)


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="need --runslow option to run")
    for item in items:
        if item.get_closest_marker("slow") is not None:
            item.add_marker(skip_slow)
