import json
import os
import sys

import pytest

HERE = os.path.dirname(__file__)
SCHEMA_DIR = os.path.join(HERE, os.pardir, "docs", "schemas")

# make tests/oracles.py importable regardless of invocation directory
sys.path.insert(0, HERE)


@pytest.fixture(scope="session")
def schemas():
    def load(name):
        with open(os.path.join(SCHEMA_DIR, f"{name}.schema.json")) as fh:
            return json.load(fh)
    return load


# ---------------------------------------------------------------- acceptance summary

_criteria = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion number n")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or not (rep.when == "call" or rep.failed):
        return
    n, title = marker.args
    entry = _criteria.setdefault(n, {"title": title, "ok": True, "notes": []})
    entry["ok"] = entry["ok"] and rep.passed
    entry["notes"] += [str(v) for k, v in item.user_properties if k == "measured"]


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    tr = terminalreporter
    tr.write_sep("=", "acceptance criteria")
    for n in sorted(_criteria):
        e = _criteria[n]
        status = "PASS" if e["ok"] else "FAIL"
        notes = "; ".join(e["notes"])
        tr.write_line(f"[{status}] criterion {n}: {e['title']}" + (f"  ({notes})" if notes else ""))
