import numpy as np
import pytest

ACCEPTANCE = {}


def record(num, title, ok, detail=""):
    """Store and print a one-line verdict for an acceptance criterion."""
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {num:2d}: {title} {detail}".rstrip()
    ACCEPTANCE[num] = line
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[num])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(params=["1", "0"], ids=["numba", "numpy"])
def kernel_mode(request, monkeypatch):
    monkeypatch.setenv("NLFRAME_NUMBA", request.param)
    return request.param


@pytest.fixture
def clean_seed_env(monkeypatch):
    monkeypatch.delenv("NLFRAME_SEED", raising=False)
