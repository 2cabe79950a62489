import pytest

from lobfractal.events import EventRecord, EventType, Side

A, X, C, D = EventType.ADD, EventType.EXECUTE, EventType.CANCEL, EventType.DELETE
BID, ASK = Side.BID, Side.ASK

# Hand-traced day used by the book and duration tests:
#   1 ADD bid 100x50      -> ORDER, book empty so not at best
#   2 ADD ask 102x30      -> ORDER, ask ladder empty so not at best
#   3 EXECUTE 2 x30       -> TRADE ask at best, lifetime 250 - 100 = 150
#   4 CANCEL 1 x50        -> CANCEL bid at best, lifetime 500 - 0 = 500
#   5 ADD bid 99x10       -> ORDER, bid ladder empty again
#   6 ADD bid 99x20       -> ORDER at best (99)
GOLDEN_EVENTS = [
    EventRecord(34_200_000, A, 1, BID, 100, 50),
    EventRecord(34_200_100, A, 2, ASK, 102, 30),
    EventRecord(34_200_250, X, 2, ASK, 102, 30),
    EventRecord(34_200_500, C, 1, BID, 100, 50),
    EventRecord(34_200_600, A, 3, BID, 99, 10),
    EventRecord(34_200_600, A, 4, BID, 99, 20),
]


@pytest.fixture
def golden_events():
    return list(GOLDEN_EVENTS)


_ACCEPTANCE = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE] = []


@pytest.fixture
def acceptance(request, capsys):
    """Record one PASS/FAIL line for an acceptance criterion and echo it."""

    def report(criterion: str, passed: bool, detail: str) -> None:
        line = f"{'PASS' if passed else 'FAIL'}  {criterion}: {detail}"
        request.config.stash[_ACCEPTANCE].append(line)
        with capsys.disabled():
            print(f"\n[acceptance] {line}")

    return report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
