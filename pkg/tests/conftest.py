import pytest

_ACCEPTANCE = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(code, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    if report.when == "call" or (report.when == "setup" and not report.passed):
        code, title = marker.args
        measured = "; ".join(f"{k}={v}" for k, v in item.user_properties if k != "measured_raw")
        _ACCEPTANCE[code] = (title, report.outcome, measured, report.duration)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    write = terminalreporter.write_line
    terminalreporter.section("acceptance criteria")
    for code in sorted(_ACCEPTANCE, key=lambda c: int(c[2:])):
        title, outcome, measured, duration = _ACCEPTANCE[code]
        status = "PASS" if outcome == "passed" else "FAIL"
        line = f"{status} {code:<5} {title} [{duration:.1f}s]"
        if measured:
            line += f" :: {measured}"
        write(line)
    passed = sum(v[1] == "passed" for v in _ACCEPTANCE.values())
    write(f"{passed}/{len(_ACCEPTANCE)} acceptance criteria passed")
