import pytest

# Fixed once for the whole suite; not tuned to make any check pass.
SUITE_SEED = 20261016

ACCEPTANCE_LINES: list = []


@pytest.fixture
def suite_seed():
    return SUITE_SEED


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
