import pytest

from hjbwaves.model import ModelParams
from hjbwaves.waves import compute_wave_spec, integrate_profile

# Example wave data used throughout the suite.
SIMPLE_LIMITS = (2.0, 0.5)
GENERAL_LIMITS = (1.0, 10.0 / 3.0)
# three-root example: c = -0.08, K0 = 0.1; limits are the roots of the
# quadratic pieces of G, (2/3)v^2 - 1.08v + 13/30 and 0.08v^2 - (13/30)v + 1/3
GENERAL_B_LIMITS = (
    (1.08 + (1.08**2 - 4 * (2 / 3) * (13 / 30)) ** 0.5) / (4 / 3),
    ((13 / 30) + ((13 / 30) ** 2 - 4 * 0.08 / 3) ** 0.5) / 0.16,
)


@pytest.fixture(scope="session")
def simple_params():
    return ModelParams.simple(1.0)


@pytest.fixture(scope="session")
def general_params():
    return ModelParams.general(1.0, 1.5)


@pytest.fixture(scope="session")
def simple_spec(simple_params):
    return compute_wave_spec(simple_params, *SIMPLE_LIMITS)


@pytest.fixture(scope="session")
def general_spec(general_params):
    return compute_wave_spec(general_params, *GENERAL_LIMITS)


@pytest.fixture(scope="session")
def general_b_spec(general_params):
    return compute_wave_spec(general_params, *GENERAL_B_LIMITS)


@pytest.fixture(scope="session")
def simple_profile(simple_spec):
    return integrate_profile(simple_spec)


@pytest.fixture(scope="session")
def general_profile(general_spec):
    return integrate_profile(general_spec)


@pytest.fixture(scope="session")
def general_b_profile(general_b_spec):
    return integrate_profile(general_b_spec)


# --------------------------------------------------------------------------
# acceptance summary: one line per criterion at the end of the run

_criteria: dict[int, tuple[str, float, str, float]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title, budget_seconds): acceptance criterion")


def pytest_runtest_makereport(item, call):
    mark = item.get_closest_marker("criterion")
    if mark is None or call.when != "call":
        return
    number, title, budget = mark.args
    outcome = "PASS" if call.excinfo is None else "FAIL"
    _criteria[number] = (title, budget, outcome, call.duration)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        title, budget, outcome, duration = _criteria[number]
        terminalreporter.write_line(f"criterion {number:2d} {outcome}  {title} ({duration:.1f} s, budget {budget} s)")
