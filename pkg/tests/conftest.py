import pytest

_RESULTS = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): numbered acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None or rep.when != "call" and not rep.failed:
        return
    number, title = mark.args
    detail = dict(item.user_properties).get("detail", "")
    prev = _RESULTS.get(number, (title, True, []))
    ok = prev[1] and not rep.failed
    _RESULTS[number] = (title, ok, prev[2] + ([detail] if detail and rep.when == "call" else []))


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for number in sorted(_RESULTS):
        title, ok, details = _RESULTS[number]
        line = f"[{'PASS' if ok else 'FAIL'}] {number:>2}. {title}"
        if details:
            line += "  (" + "; ".join(details) + ")"
        tr.write_line(line)
