import pytest

from excavator_dynamics.calibration import Bundle, run_pipeline
from excavator_dynamics.kinematics import JointRates
from excavator_dynamics.presets import case_like, m545_like
from excavator_dynamics.simulator import lump_parameters

from helpers import simulate_bundle


@pytest.fixture(scope="session")
def case():
    return case_like()


@pytest.fixture(scope="session")
def m545():
    return m545_like()


@pytest.fixture(scope="session")
def geom(case):
    return case.geometry


@pytest.fixture(scope="session")
def truth(case):
    return lump_parameters(case.physical, case.geometry)


@pytest.fixture(scope="session")
def clean_bundle(case):
    return simulate_bundle(case, noise=False)


@pytest.fixture(scope="session")
def noisy_bundle(case):
    return simulate_bundle(case, noise=True)


@pytest.fixture(scope="session")
def clean_calibration(case, clean_bundle):
    return run_pipeline(Bundle.from_episodes(clean_bundle), case.geometry)


@pytest.fixture(scope="session")
def noisy_calibration(case, noisy_bundle):
    return run_pipeline(Bundle.from_episodes(noisy_bundle), case.geometry)


@pytest.fixture
def zero_rates():
    return JointRates(0.0, 0.0, 0.0, 0.0)


ACCEPTANCE_LINES = []


@pytest.fixture
def criterion():
    """Print and record one pass/fail line for an acceptance criterion."""

    def report(number, ok, text):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:>2}: {text}"
        print(line)
        ACCEPTANCE_LINES.append(line)
        return ok

    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
