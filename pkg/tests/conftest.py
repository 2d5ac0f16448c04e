import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

# (criterion, passed, detail) lines collected by the acceptance suite
ACCEPTANCE_LINES: list[tuple[str, bool, str]] = []


@pytest.fixture
def report():
    """Record one pass/fail line and echo it; the caller still asserts."""

    def _report(criterion: str, passed: bool, detail: str = "") -> bool:
        ACCEPTANCE_LINES.append((criterion, bool(passed), detail))
        print(f"{'PASS' if passed else 'FAIL'} {criterion}: {detail}")
        return bool(passed)

    return _report


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, passed, detail in ACCEPTANCE_LINES:
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'} {criterion}: {detail}")
