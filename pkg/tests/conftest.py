import pytest

_LINES: list[str] = []


class CriterionLog:
    def __init__(self, number: int, title: str):
        self.number = number
        self.title = title

    def report(self, ok: bool, detail: str) -> None:
        _LINES.append(f"criterion {self.number:>2} {'PASS' if ok else 'FAIL'}  {self.title}: {detail}")
        assert ok, detail


@pytest.fixture
def criterion():
    return CriterionLog


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
