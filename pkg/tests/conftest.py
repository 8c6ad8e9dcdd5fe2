"""Collects acceptance outcomes and prints one PASS/FAIL line per criterion."""

import pytest

_CRITERIA: dict = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): test backs an acceptance criterion")


def _entry(item):
    mark = item.get_closest_marker("acceptance")
    if mark is None:
        return None
    number, title = mark.args
    return _CRITERIA.setdefault(number, {"title": title, "ok": True, "notes": []})


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    entry = _entry(item)
    if entry is not None and (rep.when == "call" or rep.failed or rep.skipped):
        entry["ok"] = entry["ok"] and rep.passed


@pytest.fixture
def report(request):
    """Attach a margin or measured value to the criterion's summary line."""
    entry = _entry(request.node)

    def note(text: str) -> None:
        if entry is not None:
            entry["notes"].append(text)

    return note


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        e = _CRITERIA[number]
        status = "PASS" if e["ok"] else "FAIL"
        notes = f"  [{'; '.join(e['notes'])}]" if e["notes"] else ""
        terminalreporter.write_line(f"{status}  criterion {number}: {e['title']}{notes}")
