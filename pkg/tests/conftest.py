import pytest

from ehsim.scissor import calibrate_from_envelope

# one line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture(scope="session")
def params():
    """Default geometry: 5.026 m reach, 24 links, 0.1 m mount clearance."""
    return calibrate_from_envelope(5.026, 24, 0.1)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[key])
