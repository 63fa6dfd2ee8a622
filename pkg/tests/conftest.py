import pytest

_verdicts = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    n = mark.args[0]
    detail = "; ".join(str(v) for k, v in item.user_properties if k == "detail")
    if report.when == "setup" and report.skipped:
        _verdicts.setdefault(n, []).append(("EXCLUDED", report.longrepr[2].removeprefix("Skipped: ")))
    elif report.when == "setup" and report.failed:
        _verdicts.setdefault(n, []).append(("FAIL", "setup error"))
    elif report.when == "call":
        if report.skipped:
            verdict = "EXCLUDED"
            detail = report.longrepr[2].removeprefix("Skipped: ")
        else:
            verdict = "PASS" if report.passed else "FAIL"
        _verdicts.setdefault(n, []).append((verdict, detail))


def pytest_terminal_summary(terminalreporter):
    if not _verdicts:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_verdicts):
        results = _verdicts[n]
        verdicts = {v for v, _ in results}
        overall = "FAIL" if "FAIL" in verdicts else "EXCLUDED" if verdicts == {"EXCLUDED"} else "PASS"
        details = " | ".join(d for _, d in results if d)
        terminalreporter.write_line(f"criterion {n:>2}: {overall:<8} {details}")
