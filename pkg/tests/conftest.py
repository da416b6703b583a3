import pytest

_CRITERIA: dict[int, str] = {}


@pytest.fixture
def criterion():
    """Record (and print) the verdict line of an acceptance criterion."""

    def record(num: int, ok: bool, detail: str = "") -> bool:
        line = f"criterion {num:>2}: {'PASS' if ok else 'FAIL'}  {detail}".rstrip()
        _CRITERIA[num] = line
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_CRITERIA):
        terminalreporter.write_line(_CRITERIA[num])
