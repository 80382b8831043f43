"""Collects acceptance outcomes and prints one PASS/FAIL line per criterion."""

from __future__ import annotations

_outcomes: dict[int, dict] = {}


def _criterion(item):
    mark = item.get_closest_marker("acceptance")
    if mark is None:
        return None
    number, title = mark.args
    return number, title


def pytest_collection_modifyitems(items):
    for item in items:
        crit = _criterion(item)
        if crit:
            number, title = crit
            _outcomes.setdefault(number, {"title": title, "passed": True, "ran": 0, "failed": []})


def pytest_runtest_makereport(item, call):
    crit = _criterion(item)
    if crit is None:
        return
    entry = _outcomes[crit[0]]
    if call.when == "call":
        entry["ran"] += 1
    if call.excinfo is not None:
        entry["passed"] = False
        entry["failed"].append(item.name)


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_outcomes):
        e = _outcomes[number]
        status = "PASS" if e["passed"] and e["ran"] else ("NOT RUN" if not e["ran"] else "FAIL")
        line = f"criterion {number} {status}: {e['title']}"
        if e["failed"]:
            line += f" (failed: {', '.join(e['failed'])})"
        terminalreporter.write_line(line)
