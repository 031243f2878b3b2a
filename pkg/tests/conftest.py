import pytest

CRITERIA: dict[int, str] = {}


@pytest.fixture
def report_criterion():
    """Record one PASS/FAIL line per acceptance criterion."""

    def record(number: int, passed: bool, detail: str, label: str | None = None) -> bool:
        status = label or ("PASS" if passed else "FAIL")
        CRITERIA[number] = f"criterion {number:2d}: {status}  {detail}"
        print(CRITERIA[number])
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for n in sorted(CRITERIA):
            terminalreporter.write_line(CRITERIA[n])
