"""Shared pytest plumbing: the acceptance checklist printer.

Acceptance tests register one line each via ``record_acceptance``; the
collected lines are printed as a block after the test run so the overall
verdict is readable without scrolling through individual test output.
"""

_CHECKLIST: list[tuple[str, bool, str]] = []


def record_acceptance(name: str, ok: bool, detail: str = "") -> None:
    _CHECKLIST.append((name, bool(ok), detail))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _CHECKLIST:
        return
    terminalreporter.section("acceptance checklist")
    for name, ok, detail in _CHECKLIST:
        line = f"{'PASS' if ok else 'FAIL'}: {name}"
        if detail:
            line += f" [{detail}]"
        terminalreporter.write_line(line)
