import pytest

from tricrystal.graph import EdgeGrid


@pytest.fixture(scope="session")
def grid():
    return EdgeGrid(40.0, 4001)


@pytest.fixture(scope="session")
def fine_grid():
    return EdgeGrid(40.0, 8001)


@pytest.fixture(scope="session")
def coarse_grid():
    return EdgeGrid(20.0, 401)


ACCEPTANCE_LINES = []


@pytest.fixture
def criterion_report():
    """Call with (number, passed, detail); the line is echoed and kept for the terminal summary."""
    def record(number, passed, detail):
        line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
        print(line)
        ACCEPTANCE_LINES.append(line)
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
