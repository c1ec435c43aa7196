import numpy as np
import pytest

from matbandit import generate_ground_truth
from matbandit.lowrank_sgd import FactorPair


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def small_truth(rng):
    return generate_ground_truth(8, 8, 2, [1.0, 0.8], [1.2, 0.6], 0.1, 0.1, rng)


def random_pair(rng, d1, d2, r, scale=1.0):
    return FactorPair(scale * rng.standard_normal((d1, r)), scale * rng.standard_normal((d2, r)))


def pytest_terminal_summary(terminalreporter):
    import sys

    lines = getattr(sys.modules.get("test_acceptance"), "RESULT_LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for k in sorted(lines):
            terminalreporter.write_line(lines[k])
