import numpy as np
import pytest

from ureduce.kernels import Kernel


def constant_kernel(c=2.5, r=3):
    return Kernel("constant", r, lambda pts: np.full(pts.shape[:-2], float(c)))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: Monte Carlo checks taking more than a few seconds")
    config.addinivalue_line("markers", "acceptance: end-to-end acceptance criteria")


ACCEPTANCE_LINES = []


@pytest.fixture
def verdict():
    """Record one ``CRITERION k: PASS|FAIL`` line, echoed in the terminal summary."""

    def record(k, ok, detail):
        line = f"CRITERION {k}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
