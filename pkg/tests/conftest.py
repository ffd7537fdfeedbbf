"""Acceptance reporting: one PASS/FAIL line per criterion at the end of the run."""

import pytest

_RESULTS: dict[int, list] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        notes = [str(v) for k, v in item.user_properties if k == "detail"]
        _RESULTS.setdefault(mark.args[0], []).append((item.name, rep.passed, notes))


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(_RESULTS):
        parts = _RESULTS[n]
        ok = all(p for _, p, _ in parts)
        failed = [name for name, p, _ in parts if not p]
        notes = "; ".join(x for _, _, ns in parts for x in ns)
        line = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'} ({len(parts) - len(failed)}/{len(parts)} checks)"
        if failed:
            line += " failed: " + ", ".join(failed)
        tr.write_line(line)
        if notes:
            tr.write_line(f"              {notes}")
