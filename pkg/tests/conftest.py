import pytest

_RESULTS = {}


def _key(cid):
    num = "".join(ch for ch in cid if ch.isdigit())
    return (int(num), cid)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None:
        return
    if report.when == "call" or (report.when == "setup" and not report.passed):
        cid, title = mark.args
        detail = "; ".join(v for k, v in item.user_properties if k == "detail")
        if hasattr(report, "wasxfail"):
            status = "FAIL"
            detail = (detail + "; " if detail else "") + "known gap, see decisions ledger"
        else:
            status = "PASS" if report.passed else "FAIL"
        _RESULTS[cid] = (status, title, detail)


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for cid in sorted(_RESULTS, key=_key):
        status, title, detail = _RESULTS[cid]
        line = f"{status} [{cid}] {title}"
        terminalreporter.write_line(line + (f" -- {detail}" if detail else ""))
