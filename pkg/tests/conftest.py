import sys

import pytest

from paramils.space import parse_space


@pytest.fixture
def saps_space():
    return parse_space(
        "alpha {1.01,1.066,1.126,1.189,1.256,1.326,1.4}[1.189]\n"
        "rho {0,0.17,0.333,0.5,0.666,0.83,1}[0.5]\n"
        "ps {0,0.033,0.066,0.1,0.133,0.166,0.2}[0.1]\n"
        "wp {0,0.01,0.02,0.03,0.04,0.05,0.06}[0.01]\n"
    )


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
