"""Collects the one-line verdicts of the acceptance criteria and prints them at the end."""

VERDICTS = {}


def record(criterion: int, passed: bool, detail: str) -> str:
    line = f"CRITERION {criterion}: {'PASS' if passed else 'FAIL'} - {detail}"
    VERDICTS[criterion] = line
    print(line)
    return line


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(VERDICTS):
        terminalreporter.write_line(VERDICTS[k])
