import numpy as np
import pytest

from epclass.model import load_model

_ACCEPTANCE = []


def record_criterion(number, ok, detail):
    """Remember one acceptance line for the end-of-run summary."""
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {detail}"
    _ACCEPTANCE.append((number, line))
    print(line)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(_ACCEPTANCE):
        terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def ssh():
    return load_model("ssh")


@pytest.fixture(scope="session")
def three_band():
    return load_model("three-band")


@pytest.fixture(scope="session")
def sqrt_ep():
    return load_model("sqrt-ep")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
