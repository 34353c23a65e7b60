import pytest

_LINES = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_LINES] = []


@pytest.fixture
def criterion(request):
    """``criterion(number, name, ok, detail)`` records one acceptance line."""

    def record(number, name, ok, detail=""):
        line = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {name}: {detail}"
        request.config.stash[_LINES].append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
