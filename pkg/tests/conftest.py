import pytest

_CRITERIA: list = []


@pytest.fixture
def criterion():
    """Record one acceptance line: ``criterion(number, passed, detail)``."""

    def record(number, passed, detail=""):
        _CRITERIA.append((number, bool(passed), detail))
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number, passed, detail in sorted(_CRITERIA, key=lambda r: str(r[0])):
        tag = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"criterion {number}: {tag}  {detail}")
