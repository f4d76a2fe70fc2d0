"""Shared pytest plumbing: collect acceptance lines and echo them in the
terminal summary, where default output capture cannot swallow them."""

_acceptance_lines = []


def record_acceptance(line: str) -> None:
    _acceptance_lines.append(line)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)
