import math

import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("esx", deadline=None, max_examples=60)
settings.load_profile("esx")


def benchmark_oracle(x, h0=10.0, amp=0.0):
    """Independent transcription of the benchmark cost used as a test oracle."""
    x = np.asarray(x, dtype=float)
    pi = math.pi
    piece = np.select(
        [x < pi, x < 2 * pi],
        [(x - pi) ** 2 - 1, np.cos(x - pi) - 2],
        (x - 2 * pi) ** 2 - 3,
    )
    return h0 + amp * np.sin(10 * x) + piece


@pytest.fixture
def oracle():
    return benchmark_oracle


# One line per acceptance criterion, printed at the end of the session.
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])
