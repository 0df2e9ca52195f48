import pytest

_RESULTS = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        _RESULTS[mark.args[0]] = (mark.args[1], rep.outcome)


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for num in sorted(_RESULTS):
        title, outcome = _RESULTS[num]
        verdict = "PASS" if outcome == "passed" else "FAIL" if outcome == "failed" else outcome.upper()
        tr.write_line(f"criterion {num:2d}  {verdict:4s}  {title}")
