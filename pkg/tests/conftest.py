"""Shared fixtures and the per-criterion PASS/FAIL summary for acceptance tests."""

from __future__ import annotations

from collections import OrderedDict

import numpy as np
import pytest

_criteria: "OrderedDict[int, dict]" = OrderedDict()


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None or rep.when not in ("setup", "call"):
        return
    number, title = mark.args
    entry = _criteria.setdefault(number, {"title": title, "ok": True, "notes": [], "ran": False})
    if rep.when == "call":
        entry["ran"] = True
    if rep.failed:
        entry["ok"] = False
    if rep.when == "call":
        entry["notes"] += [f"{k}={v}" for k, v in item.user_properties]


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for number in sorted(_criteria):
        e = _criteria[number]
        flag = "PASS" if e["ok"] and e["ran"] else "FAIL"
        notes = "; ".join(e["notes"])
        tr.write_line(f"{flag}  criterion {number:>2}  {e['title']}" + (f"  [{notes}]" if notes else ""))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
