import pytest
from hypothesis import settings

from vispose.defaults import desktop_orientation_model
from vispose.mobility import DEFAULT_POSITION_MODEL
from vispose.splitter import PoseModels

# derandomized so repeated runs exercise the same examples
settings.register_profile("repo", deadline=None, derandomize=True, max_examples=60)
settings.load_profile("repo")

# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def orientation():
    return desktop_orientation_model()


@pytest.fixture(scope="session")
def position():
    return DEFAULT_POSITION_MODEL


@pytest.fixture(scope="session")
def models(orientation, position):
    return PoseModels(orientation, position)


@pytest.fixture
def verdict():
    """Record and print a PASS/FAIL line, then assert it."""
    def record(number: int, ok: bool, detail: str):
        line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
