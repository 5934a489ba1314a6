from __future__ import annotations

import numpy as np
import pytest

from polymer_lab.environment import Environment, Region


def two_path_env() -> Environment:
    """(0,0) -> (0,4) with w(0,2)=2, w(2,2)=1 and every other weight 1."""
    region = Region.rectangle(0, 4, 4)
    return Environment.from_function(lambda x, t: 2.0 if (x, t) == (0, 2) else 1.0, region)


@pytest.fixture
def const_env():
    return Environment.constant(1.0, Region.rectangle(0, 30, 30))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
