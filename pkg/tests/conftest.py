import pytest

from nfdp.channel import ChannelPair, make_bsc, make_identity
from nfdp.policy import MemoryUpdate


@pytest.fixture
def binary():
    """BSC(0.1) forward, BSC(0.2) feedback."""
    return ChannelPair(make_bsc(0.1), make_bsc(0.2))


@pytest.fixture
def noiseless():
    return ChannelPair(make_bsc(0.1), make_identity(2))


def memory_rule(U, Z=2, M=2):
    return MemoryUpdate.constant(Z, M) if U == 1 else MemoryUpdate.last_feedback(Z, M)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for n in sorted(lines):
            terminalreporter.write_line(lines[n])
