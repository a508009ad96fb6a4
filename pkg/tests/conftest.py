import numpy as np
import pytest

from mvselect.workload import dense_workload

from oracles import ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def one_view():
    """1 query (base 100, weight 1) and 1 view answering it at 10."""
    return dense_workload([(50.0, 5.0, 10.0)], base_costs=[100.0], storage_budget=100.0, name="one")


@pytest.fixture
def three_by_three():
    rows = [
        (40.0, 3.0, 20.0, None, 70.0),
        (25.0, 1.0, None, 15.0, None),
        (60.0, 4.0, 35.0, 30.0, 10.0),
    ]
    return dense_workload(rows, base_costs=[50.0, 40.0, 80.0], storage_budget=80.0, name="3x3")

