"""Suite-wide pytest hooks.

The acceptance tests accumulate one line per criterion; print them in the
terminal summary so the verdicts are visible without ``-s``.
"""


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    try:
        from test_acceptance import ACCEPTANCE_LINES
    except ImportError:
        return
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for line in ACCEPTANCE_LINES:
        terminalreporter.write_line(line)
