"""Shared test hooks: one-line pass/fail report per acceptance criterion."""

ACCEPTANCE_DETAILS = {}


def record_acceptance(name: str, detail: str) -> None:
    ACCEPTANCE_DETAILS[name] = detail


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    rows = []
    for status, flag in (("passed", "PASS"), ("failed", "FAIL"), ("error", "FAIL")):
        for rep in terminalreporter.stats.get(status, []):
            nodeid = getattr(rep, "nodeid", "")
            if "test_acceptance.py::test_criterion" in nodeid:
                rows.append((nodeid.split("::")[-1], flag))
    if not rows:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for name, flag in sorted(rows):
        detail = ACCEPTANCE_DETAILS.get(name, "")
        terminalreporter.write_line(f"{flag}  {name}  {detail}")
