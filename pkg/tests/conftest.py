import pytest
from hypothesis import settings

from acceptance_log import LINES

# exact arithmetic has heavy-tailed timings; correctness, not speed, is under test
settings.register_profile("exact", deadline=None)
settings.load_profile("exact")


def pytest_terminal_summary(terminalreporter):
    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def run_cli(capsys):
    from bckp.cli import main

    def run(*argv):
        code = main(list(argv))
        out = capsys.readouterr()
        return code, out.out, out.err

    return run
