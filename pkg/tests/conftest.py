import pytest

# (criterion number, description, passed, measured detail)
ACCEPTANCE_LINES: list[tuple[int, str, bool, str]] = []


@pytest.fixture
def criterion():
    """Record a criterion's outcome; the assertion still decides the test result."""

    def record(number: int, text: str, passed: bool, detail: str = "") -> bool:
        ACCEPTANCE_LINES.append((number, text, bool(passed), detail))
        line = f"[{'PASS' if passed else 'FAIL'}] AC{number:<2} {text}" + (f"  ({detail})" if detail else "")
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number, text, passed, detail in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(
            f"[{'PASS' if passed else 'FAIL'}] AC{number:<2} {text}" + (f"  ({detail})" if detail else "")
        )
