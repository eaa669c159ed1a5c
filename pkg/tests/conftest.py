import pytest

_CRITERIA: dict = {}


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "criterion(number, text): acceptance criterion checked by this test"
    )


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or report.when not in ("setup", "call"):
        return
    number, text = mark.args
    if report.when == "setup" and report.passed:
        return
    prev = _CRITERIA.get(number, (text, True))
    _CRITERIA[number] = (text, prev[1] and report.passed)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        text, ok = _CRITERIA[number]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  criterion {number:>2}: {text}")
