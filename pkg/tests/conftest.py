import re

import pytest

# criterion id -> [title, {test name: passed}]
_RESULTS = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(cid, title): acceptance criterion covered by the test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        cid, title = mark.args
        entry = _RESULTS.setdefault(cid, [title, {}])
        entry[1][item.name] = rep.passed and not hasattr(rep, "wasxfail")


def _order(cid):
    return int(re.sub(r"\D", "", cid) or 0)


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for cid in sorted(_RESULTS, key=_order):
        title, tests = _RESULTS[cid]
        ok = all(tests.values())
        failed = [name for name, passed in tests.items() if not passed]
        detail = f"  (failing: {', '.join(failed)})" if failed else ""
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {cid:<4} {title}{detail}")
