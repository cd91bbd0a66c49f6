import pytest

from tourplan.core import Problem
from tourplan.instances import t1


@pytest.fixture
def t1_rmt():
    return t1(Problem.rmt(6.0))


@pytest.fixture
def t1_bmt():
    return t1(Problem.bmt(11.0))


_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def criterion(request):
    """``with criterion(k, title): ...`` records a PASS/FAIL line for acceptance check ``k``."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, [])

    class _Check:
        def __init__(self, k, title):
            self.k, self.title = k, title

        def __enter__(self):
            return self

        def __exit__(self, exc_type, exc, tb):
            line = f"{'PASS' if exc_type is None else 'FAIL'}  criterion {self.k}: {self.title}"
            lines.append(line)
            print(line)
            return False

    return _Check


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
