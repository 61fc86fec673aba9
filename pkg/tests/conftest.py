import pytest

_ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def acceptance_lines():
    """Shared registry the acceptance tests append their summary lines to."""
    return _ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance summary")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
