import re

_criteria: dict[int, tuple[str, str]] = {}


def pytest_runtest_logreport(report):
    m = re.search(r"test_acceptance\.py::test_criterion_(\d+)", report.nodeid)
    if not m or (report.when != "call" and report.passed):
        return
    detail = dict(report.user_properties).get("detail", "")
    _criteria[int(m.group(1))] = ("PASS" if report.passed else "FAIL", detail)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_criteria):
        status, detail = _criteria[k]
        terminalreporter.write_line(f"criterion {k}: {status}  {detail}")
