import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

_RESULTS: list[tuple[str, bool, str]] = []


class Criterion:
    """Collects one PASS/FAIL line per acceptance criterion."""

    def __init__(self, name: str):
        self.name = name

    def check(self, ok: bool, detail: str):
        _RESULTS.append((self.name, bool(ok), detail))
        line = f"[{'PASS' if ok else 'FAIL'}] {self.name}: {detail}"
        print(line)
        assert ok, line


@pytest.fixture
def criterion(request):
    return Criterion(request.node.get_closest_marker("criterion").args[0])


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(name): acceptance criterion name")


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in _RESULTS:
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    passed = sum(ok for _, ok, _ in _RESULTS)
    terminalreporter.write_line(f"{passed}/{len(_RESULTS)} criteria pass")


@pytest.fixture(scope="session")
def fixtures_dir():
    from grrhyme.evaluation import fixture_path
    return fixture_path("sample_corpus.json").parent
