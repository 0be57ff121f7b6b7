import time

import pytest

_RESULTS = {}


class Criterion:
    """Records one acceptance criterion: outcome, detail and wall time vs limit."""

    def __init__(self, number, title, limit_s):
        self.number, self.title, self.limit_s = number, title, limit_s
        self.t0 = time.perf_counter()

    def finish(self, ok, detail=""):
        elapsed = time.perf_counter() - self.t0
        in_time = elapsed < self.limit_s
        passed = bool(ok) and in_time
        timing = f"{elapsed:.2f}s < {self.limit_s:g}s" if in_time else f"{elapsed:.2f}s >= {self.limit_s:g}s (too slow)"
        line = f"[{'PASS' if passed else 'FAIL'}] {self.number:>2}. {self.title}: {detail} ({timing})"
        _RESULTS[self.number] = line
        print(line)
        assert passed, line


@pytest.fixture
def criterion():
    return Criterion


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_RESULTS):
        terminalreporter.write_line(_RESULTS[k])
