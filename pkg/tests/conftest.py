import hypothesis

hypothesis.settings.register_profile(
    "suite", deadline=None, derandomize=True, max_examples=50
)
hypothesis.settings.load_profile("suite")

# filled by test_acceptance, echoed after the run so the per-criterion
# verdicts are visible without -s
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_line("")
        terminalreporter.write_line("acceptance criteria")
        terminalreporter.write_line("-------------------")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
