import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from mumimo.channel import ToneChannel, ToneObservation, transmit
from mumimo.constellation import ConstellationKind, build_constellation

#: verdict lines collected by the acceptance tests, echoed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(2024)


def random_observation(rng, ms_kind=ConstellationKind.QAM4,
                       mi_kind=ConstellationKind.QAM4, noise_var=0.1,
                       sir_scale=1.0, tone_index=0):
    """One random i.i.d.-fading tone with uniform symbols from both users."""
    ms = build_constellation(ms_kind)
    mi = build_constellation(mi_kind)
    h = (rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))) / np.sqrt(2)
    chan = ToneChannel(h1=h[:, 0], h2=h[:, 1], tone_index=tone_index)
    x1 = ms.points[rng.integers(ms.size)]
    x2 = mi.points[rng.integers(mi.size)]
    return transmit(chan, x1, x2, sir_scale, noise_var, rng)
