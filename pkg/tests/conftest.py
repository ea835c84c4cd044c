import pytest

_LOG = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_LOG] = []


@pytest.fixture
def acceptance_log(request):
    """Append (criterion, passed, detail); lines are printed in the terminal summary."""
    return request.config.stash[_LOG]


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    rows = config.stash.get(_LOG, [])
    if not rows:
        return
    terminalreporter.section("acceptance criteria")
    for k, ok, detail in sorted(rows):
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")
