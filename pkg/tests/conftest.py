from pathlib import Path

import pytest

CORPUS = Path(__file__).parent / "corpus"


def pytest_configure(config):
    config._criteria = []


@pytest.fixture
def criterion(request):
    """report(number, ok, detail): print and collect one PASS/FAIL line, then assert."""
    def report(number: int, ok: bool, detail: str = "") -> None:
        line = f"ACCEPTANCE {number}: {'PASS' if ok else 'FAIL'}  {detail}".rstrip()
        print(line)
        request.config._criteria.append(line)
        assert ok, line
    return report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_criteria", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)


@pytest.fixture
def corpus():
    return CORPUS
