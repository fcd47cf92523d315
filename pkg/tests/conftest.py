import pytest

from hybridmac import engine

# criterion -> (passed, detail); filled by test_acceptance, printed at session end
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(ACCEPTANCE_LINES):
        passed, detail = ACCEPTANCE_LINES[name]
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}")


@pytest.fixture(params=engine.available_backends())
def backend(request):
    return request.param


class Scripted:
    """Stand-in for a numpy Generator that replays fixed uniforms."""

    def __init__(self, *values):
        self.values = list(values)

    def random(self):
        return self.values.pop(0)


class ScriptedStreams:
    def __init__(self, arrival=(), pick=(), backoff=()):
        self.arrival = Scripted(*arrival)
        self.pick = Scripted(*pick)
        self.backoff = Scripted(*backoff)
