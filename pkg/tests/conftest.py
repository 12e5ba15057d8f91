import numpy as np
import pytest

from nsgalerkin.experiments import random_divfree_field

# filled by tests/test_acceptance.py, printed after the run
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_field(seed, cutoff=4, real=True, alpha=2.0, epsilon=1.0):
    return random_divfree_field(seed, epsilon, alpha, cutoff, real)


def dict_of(u):
    """Nonzero modes of a field as a plain dict, for loop oracles."""
    return {k: np.array(v) for k, v in u.nonzero_items()}
