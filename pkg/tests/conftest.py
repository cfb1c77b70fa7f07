import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from thermoform.maps import build_catalog_map

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def z2():
    return build_catalog_map("power", [2])


@pytest.fixture(scope="session")
def z3():
    return build_catalog_map("power", [3])


@pytest.fixture(scope="session")
def quad():
    return build_catalog_map("quadratic", [0.1])


@pytest.fixture(scope="session")
def exp03():
    return build_catalog_map("exp", [0.3])


@pytest.fixture(scope="session")
def exp1():
    # outside the hyperbolic range: used only for explicit closed-form sums
    return build_catalog_map("exp", [1.0], check_range=False)


def ones(z):
    return np.ones(np.shape(z))


# acceptance lines are collected here and repeated in the terminal summary
ACCEPTANCE = {}


@pytest.fixture
def criterion(request):
    def report(number, ok, detail, elapsed, limit):
        ok = bool(ok) and elapsed < limit
        line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}  [{elapsed:.1f}s < {limit:g}s]"
        ACCEPTANCE[number] = line
        print(line)
        return ok

    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
