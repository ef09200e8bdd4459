import pytest

_ACCEPTANCE = pytest.StashKey[list]()


class AcceptanceLog:
    def __init__(self, lines):
        self.lines = lines

    def record(self, number, title, passed, detail):
        line = f"{'PASS' if passed else 'FAIL'} criterion {number}: {title} | {detail}"
        self.lines.append(line)
        print(line)
        return passed


@pytest.fixture(scope="session")
def acceptance(request):
    return AcceptanceLog(request.config.stash.setdefault(_ACCEPTANCE, []))


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
