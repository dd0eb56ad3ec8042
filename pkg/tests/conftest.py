import json
from pathlib import Path

import numpy as np
import pytest

from gibbsfrag.samplers import RngStream

FROZEN_PATH = Path(__file__).with_name("frozen_values.json")


@pytest.fixture(scope="session")
def frozen():
    return json.loads(FROZEN_PATH.read_text())


@pytest.fixture
def rng():
    return RngStream(20240601, 1)


def enumerate_probs(fn, n):
    from gibbsfrag.partitions import enumerate_set_partitions
    return np.array([fn(p) for p in enumerate_set_partitions(n)])


ACCEPTANCE = {}


@pytest.fixture
def criterion():
    """Record one acceptance verdict; the terminal summary prints them in order."""
    def record(number, title, passed, detail):
        ACCEPTANCE[number] = (title, bool(passed), detail)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        title, passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] {number:2d}. {title}: {detail}")
