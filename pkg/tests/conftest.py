def pytest_terminal_summary(terminalreporter):
    from test_acceptance import OUTCOMES

    if not OUTCOMES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(OUTCOMES):
        terminalreporter.write_line(OUTCOMES[n])
