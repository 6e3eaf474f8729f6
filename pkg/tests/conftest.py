"""Shared fixtures: a pinned runtime config, a clean arbiter and a seeded RNG."""

import numpy as np
import pytest
from hypothesis import settings

from hwnum.backends import BackendTag, get_arbiter, use_config

settings.register_profile("default", deadline=None, max_examples=50)
settings.load_profile("default")


@pytest.fixture(autouse=True)
def _pinned_config():
    """Small blocks and several workers, so Blocked/Parallel really split work."""
    with use_config(worker_count=4, block_size=64, default_backend=BackendTag.GENERIC) as cfg:
        yield cfg


@pytest.fixture
def arbiter():
    arb = get_arbiter()
    arb.reset()
    return arb


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(results):
        terminalreporter.write_line(results[num])
