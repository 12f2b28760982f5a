import pytest

_LINES: list[str] = []


class Report:
    def __init__(self, number: int, title: str):
        self.number, self.title = number, title

    def __call__(self, passed: bool, detail: str) -> bool:
        line = f"criterion {self.number:>2} {'PASS' if passed else 'FAIL'}  {self.title}: {detail}"
        _LINES.append(line)
        print(line, flush=True)
        return passed


@pytest.fixture
def criterion():
    return Report


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
