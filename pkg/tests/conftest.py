import functools

import numpy as np
import pytest

from panoforge import synthetic


@functools.lru_cache(maxsize=None)
def _texture(h, w, seed, color):
    return synthetic.texture(h, w, seed, color)


@pytest.fixture
def texture():
    """Cached procedural texture; callers must not modify the result."""
    return lambda h=240, w=320, seed=0, color=False: _texture(h, w, seed, color)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


_criteria: dict = {}


def pytest_runtest_logreport(report):
    if report.when != "call" or "test_acceptance.py" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    if name.startswith("test_criterion_"):
        num = int(name.split("_")[2])
        _criteria[num] = _criteria.get(num, True) and report.passed


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_criteria):
        terminalreporter.write_line(f"criterion {num}: {'PASS' if _criteria[num] else 'FAIL'}")
