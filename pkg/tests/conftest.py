import pytest

from dsapack.metrics import Placement, PlacedJob
from dsapack.trace import parse_trace

EXAMPLE_TEXT = "a 0 1\na 1 2\nf 0\na 2 3\nf 1\nf 2\n"


@pytest.fixture
def example_trace():
    return parse_trace(EXAMPLE_TEXT, name="example")


@pytest.fixture
def example_placement():
    # A at 0x01, B at 0x03, C at 0x00
    return Placement(
        [PlacedJob(0, 0, 3, 1, 1), PlacedJob(1, 1, 6, 2, 3), PlacedJob(2, 3, 6, 3, 0)],
        "example",
    )


# one line per acceptance criterion, echoed at the end of the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
