import numpy as np
import pytest

from groupvoice.signal import MonoSignal

RATE = 44100

# filled by tests/test_acceptance.py, printed at the end of the session
ACCEPTANCE_LINES = {}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def sine(freq, seconds=1.0, rate=RATE, amp=0.5, phase=0.0):
    t = np.arange(int(round(seconds * rate))) / rate
    return MonoSignal(amp * np.sin(2 * np.pi * freq * t + phase), rate)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
