"""Collects the one-line acceptance verdicts and repeats them at the end of the session."""

import pytest

_LINES = []


@pytest.fixture
def verdict():
    """Record ``PASS``/``FAIL`` for one acceptance criterion and print it."""

    def record(number: int, name: str, passed: bool, detail: str) -> bool:
        line = f"{'PASS' if passed else 'FAIL'} criterion {number:2d} {name}: {detail}"
        _LINES.append((number, line))
        print(line)
        return passed

    return record


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance: end-to-end acceptance criteria (slow)")


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(_LINES):
            terminalreporter.write_line(line)
