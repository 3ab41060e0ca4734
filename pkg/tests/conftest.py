"""One summary line per acceptance criterion, after the normal pytest report."""

_RESULTS: dict[str, tuple[str, str]] = {}


def pytest_runtest_logreport(report):
    if "acceptance" not in report.keywords:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        name = report.nodeid.split("::")[-1]
        detail = ""
        if report.failed:
            crash = getattr(report.longrepr, "reprcrash", None)
            text = crash.message if crash else str(report.longrepr)
            detail = text.strip().splitlines()[0][:200]
        _RESULTS[name] = ("PASS" if report.passed else "FAIL", detail)


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_RESULTS):
        status, detail = _RESULTS[name]
        line = f"{status}  {name}"
        terminalreporter.write_line(line + (f"  ({detail})" if detail else ""))
