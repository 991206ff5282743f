import numpy as np
import pytest

from grauert_tubes.smoothing import make_chi


@pytest.fixture(scope="session")
def chi():
    return make_chi(4.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_boundary(rng, m, tau, n):
    """``n`` random boundary points of the radius-``tau`` tube as complex arrays."""
    y = rng.normal(size=(n, m))
    y = tau * y / np.linalg.norm(y, axis=1, keepdims=True)
    x = rng.uniform(-np.pi, np.pi, size=(n, m))
    return x + 1j * y


# one summary line per acceptance criterion, filled from test reports
_CRITERIA: dict = {}


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    name = report.nodeid.split("::")[-1]
    if not name.startswith("test_criterion_"):
        return
    number = int(name.split("_")[2])
    detail = dict(report.user_properties).get("detail", "")
    _CRITERIA[number] = ("PASS" if report.passed else "FAIL", detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        status, detail = _CRITERIA[number]
        terminalreporter.write_line(f"criterion {number:2d}: {status}  {detail}")
