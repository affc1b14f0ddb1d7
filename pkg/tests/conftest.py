import numpy as np
import pytest

from discwm import SecretKey

ACCEPTANCE_LINES = []


@pytest.fixture
def key():
    return SecretKey.from_seed(12345)


@pytest.fixture
def rng():
    return np.random.default_rng(2024)


@pytest.fixture
def record_criterion():
    """Record a one-line acceptance verdict printed in the terminal summary."""

    def record(number, name, passed, detail):
        ACCEPTANCE_LINES.append(f"[{'PASS' if passed else 'FAIL'}] criterion {number}: {name} -- {detail}")

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
