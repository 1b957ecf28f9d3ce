import time

import pytest

_ACCEPTANCE = {}


class _Recorder:
    def __init__(self):
        self._start = time.perf_counter()

    def __call__(self, criterion: int, title: str, passed: bool, detail: str, limit_s: float):
        elapsed = time.perf_counter() - self._start
        ok = bool(passed) and elapsed < limit_s
        _ACCEPTANCE[criterion] = (title, ok, f"{detail}; {elapsed:.1f}s (limit {limit_s:g}s)")
        line = f"criterion {criterion} [{'PASS' if ok else 'FAIL'}] {title}: {_ACCEPTANCE[criterion][2]}"
        print(line)
        return ok


@pytest.fixture
def record():
    return _Recorder()


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_ACCEPTANCE):
        title, ok, detail = _ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k} [{'PASS' if ok else 'FAIL'}] {title}: {detail}")
