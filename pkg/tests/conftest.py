import pytest

_LINES = {}


@pytest.fixture(scope="session")
def acceptance_line():
    """Record one ``PASS``/``FAIL`` line per acceptance criterion."""

    def record(number, ok, detail):
        _LINES[number] = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(_LINES[number])

    return record


def pytest_terminal_summary(terminalreporter):
    if not _LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_LINES):
        terminalreporter.write_line(_LINES[k])

