import _acceptance


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _acceptance.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line, passed in _acceptance.summary_lines():
        terminalreporter.write_line(line, green=passed, red=not passed)
