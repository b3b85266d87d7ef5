import numpy as np
import pytest

from dermseg import _kernels

BACKENDS = _kernels.available_backends()


@pytest.fixture(params=sorted(BACKENDS))
def backend(request, monkeypatch):
    """Run a test once per kernel backend by patching the dispatch module."""
    mod = BACKENDS[request.param]
    for name in ("flood_fill", "label_components", "kmeans_assign", "median_fill"):
        monkeypatch.setattr(_kernels, name, getattr(mod, name))
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    from . import test_acceptance

    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in test_acceptance.RESULTS:
            terminalreporter.write_line(line)
