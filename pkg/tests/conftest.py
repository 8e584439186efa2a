import pytest

ACCEPTANCE: list[tuple[str, bool, str]] = []


@pytest.fixture
def report():
    def add(criterion: str, ok: bool, detail: str = "") -> None:
        ACCEPTANCE.append((criterion, ok, detail))

    return add


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, ok, detail in ACCEPTANCE:
        status = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"{status}  {criterion}  {detail}".rstrip())
