import sys


def pytest_terminal_summary(terminalreporter):
    # Acceptance results are printed here so they show up without ``-s``.
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in results:
            terminalreporter.write_line(line)
