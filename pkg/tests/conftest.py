"""Shared test plumbing: collect acceptance verdict lines and echo them
in the terminal summary, where capture cannot swallow them."""

_VERDICTS = []


def register_verdict(line: str) -> None:
    _VERDICTS.append(line)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in _VERDICTS:
            terminalreporter.write_line(line)
