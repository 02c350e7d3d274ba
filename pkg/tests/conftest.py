"""Collects one verdict line per acceptance criterion and prints them at the end of the run."""

CRITERIA_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(CRITERIA_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
        terminalreporter.write_line(line)
