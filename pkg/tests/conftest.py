import time

import pytest

# acceptance criterion name -> (passed, seconds, detail); filled by tests marked "criterion"
CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(name): acceptance criterion reported in the summary")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_call(item):
    marker = item.get_closest_marker("criterion")
    t0 = time.monotonic()
    outcome = yield
    if marker is None:
        return
    name = marker.args[0]
    exc = outcome.excinfo
    detail = "" if exc is None else str(exc[1]).splitlines()[0][:160] if str(exc[1]) else exc[0].__name__
    CRITERIA[name] = (exc is None, time.monotonic() - t0, detail)
    print(f"{'PASS' if exc is None else 'FAIL'}  {name}  ({time.monotonic() - t0:.1f}s) {detail}")


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for name, (ok, secs, detail) in CRITERIA.items():
        line = f"{'PASS' if ok else 'FAIL'}  {name}  [{secs:.1f}s]"
        if detail:
            line += f"  {detail}"
        tr.write_line(line)
