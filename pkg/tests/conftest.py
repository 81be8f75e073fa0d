import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from curvatura.field4 import make_double_torus

settings.register_profile("default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

R_DEFAULT = 1 / np.sqrt(10)

# Filled by tests/test_acceptance.py: criterion number -> (passed, detail).
ACCEPTANCE = {}


@pytest.fixture(scope="session")
def torus():
    return make_double_torus(R_DEFAULT)


@pytest.fixture(scope="session")
def torus1():
    return make_double_torus(1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
