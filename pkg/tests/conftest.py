import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from vanet_nd.scenario import ScenarioConfig, generate_scenario

# numba compiles on first use; never let that count against a deadline
settings.register_profile("repo", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")

TABLE2 = ScenarioConfig(L=1000.0, d=60.0, r=200.0, s_x=600.0, M=150, B=12)


@pytest.fixture
def table2():
    return TABLE2


@pytest.fixture
def table2_scenario():
    return generate_scenario(TABLE2, 42)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# one PASS/FAIL line per acceptance criterion, repeated at the end of the run
ACCEPTANCE_LINES = []


@pytest.fixture
def report(request):
    reporter = request.config.pluginmanager.get_plugin("terminalreporter")

    def emit(number, name, passed, detail=""):
        line = f"CRITERION {number:>2} {'PASS' if passed else 'FAIL'}  {name}"
        if detail:
            line += f"  [{detail}]"
        ACCEPTANCE_LINES.append(line)
        if reporter is not None:
            reporter.write_line("")
            reporter.write_line(line)
        return passed

    return emit


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
