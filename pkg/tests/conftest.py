import sys


def pytest_terminal_summary(terminalreporter):
    """Echo the one-line acceptance verdicts even when output capture is on."""
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "REPORT_LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
