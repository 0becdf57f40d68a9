import time

import pytest

_RESULTS = {}


class Criterion:
    def __init__(self, key, title):
        self.key = key
        self.title = title
        self.detail = ""
        self.start = time.perf_counter()

    @property
    def elapsed(self):
        return time.perf_counter() - self.start


@pytest.fixture
def criterion(request):
    """Record one acceptance criterion; the outcome is printed in the summary."""
    marker = request.node.get_closest_marker("criterion")
    crit = Criterion(*marker.args)
    yield crit
    rep = getattr(request.node, "rep_call", None)
    passed = rep is not None and rep.passed
    _RESULTS[crit.key] = (crit.title, passed, crit.detail, crit.elapsed)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call":
        item.rep_call = rep


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(key, title): acceptance criterion")


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_RESULTS, key=lambda k: int(k)):
        title, passed, detail, elapsed = _RESULTS[key]
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"[{status}] {key:>2}. {title} ({elapsed:.2f}s) {detail}")
