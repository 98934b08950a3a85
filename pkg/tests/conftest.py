"""Collects per-criterion outcomes from tests marked ``criterion`` and
prints one PASS/FAIL line for each at the end of the run."""

import pytest

_results: dict[int, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion number n")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    report = (yield).get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or not (report.when == "call" or report.failed):
        return
    n, title = marker.args
    entry = _results.setdefault(n, {"title": title, "ok": True, "notes": []})
    entry["ok"] &= report.passed
    entry["notes"] += [f"{k}={v}" for k, v in item.user_properties]


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_results):
        e = _results[n]
        line = f"criterion {n:2d}: {'PASS' if e['ok'] else 'FAIL'}  {e['title']}"
        if e["notes"]:
            line += "  [" + ", ".join(e["notes"]) + "]"
        terminalreporter.write_line(line)
