import pytest

_REPORT = {}


@pytest.fixture
def acceptance_report():
    """``record(number, title, passed, detail)`` stores one line for the end-of-run summary."""
    def record(number: int, title: str, passed: bool, detail: str = "") -> bool:
        _REPORT[number] = (title, bool(passed), detail)
        print(f"criterion {number:2d} {'PASS' if passed else 'FAIL'}: {title} {detail}")
        return bool(passed)
    return record


def pytest_terminal_summary(terminalreporter):
    if not _REPORT:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_REPORT):
        title, ok, detail = _REPORT[number]
        terminalreporter.write_line(f"{number:2d} {'PASS' if ok else 'FAIL'}  {title}  {detail}")
