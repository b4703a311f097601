import re

_CRITERION = re.compile(r"test_acceptance\.py::test_criterion_(\d+)_")
_outcomes: dict[int, bool] = {}


def pytest_runtest_logreport(report):
    m = _CRITERION.search(report.nodeid)
    if not m:
        return
    n = int(m.group(1))
    ok = not report.failed and not (report.when == "call" and report.skipped)
    _outcomes[n] = _outcomes.get(n, True) and ok


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    from test_acceptance import CRITERIA

    terminalreporter.section("acceptance criteria")
    for n in sorted(_outcomes):
        status = "PASS" if _outcomes[n] else "FAIL"
        terminalreporter.write_line(f"criterion {n:2d} [{status}] {CRITERIA.get(n, '')}")
