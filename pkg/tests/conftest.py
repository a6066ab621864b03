import os
from collections import defaultdict

import pytest
from hypothesis import settings

from oracle import small_graphs
from symspec.datasets import lesmis

settings.register_profile("default", max_examples=40, deadline=None, derandomize=True)
settings.load_profile("default")

_outcomes = defaultdict(list)
_notes = defaultdict(list)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion exercised by the test")


def pytest_collection_modifyitems(config, items):
    if os.environ.get("SYMSPEC_LARGE") == "1":
        return
    skip = pytest.mark.skip(reason="set SYMSPEC_LARGE=1 to run large-scale tests")
    for item in items:
        if "large" in item.keywords:
            item.add_marker(skip)


def pytest_runtest_logreport(report):
    crit = dict(report.user_properties).get("criterion")
    if crit is None:
        return
    if report.when == "call" or (report.when == "setup" and not report.passed):
        _outcomes[crit].append((report.nodeid.split("::")[-1], report.outcome))


@pytest.fixture(autouse=True)
def _tag_criterion(request, record_property):
    mark = request.node.get_closest_marker("criterion")
    if mark is not None:
        record_property("criterion", mark.args[0])


@pytest.fixture
def note(request):
    """Attach a measured value to the criterion's summary line."""
    crit = request.node.get_closest_marker("criterion").args[0]

    def add(text):
        _notes[crit].append(text)
        print(f"criterion {crit}: {text}")

    return add


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for crit in sorted(_outcomes):
        results = _outcomes[crit]
        states = {o for _, o in results}
        verdict = "FAIL" if "failed" in states else ("PASS" if "passed" in states else "SKIP")
        skipped = [name for name, o in results if o == "skipped"]
        failed = [name for name, o in results if o == "failed"]
        extra = []
        if failed:
            extra.append("failed: " + ", ".join(failed))
        if skipped:
            extra.append("skipped: " + ", ".join(skipped))
        extra.extend(_notes[crit])
        terminalreporter.write_line(f"criterion {crit}: {verdict}" + (" | " + "; ".join(extra) if extra else ""))


@pytest.fixture(scope="session")
def lesmis_graph():
    return lesmis()


@pytest.fixture(scope="session")
def small():
    return small_graphs()
