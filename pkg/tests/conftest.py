"""Shared pytest hooks.

Acceptance tests register one line each through :func:`criterion_line`;
the lines are printed in the terminal summary whatever the capture mode.
"""

ACCEPTANCE_LINES = []


def criterion_line(number: int, ok: bool, detail: str) -> str:
    line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append((number, line))
    print(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(line)
