import sys

import numpy as np
import pytest

from lfsr.lightfield import LightField


def random_lf(P=3, Q=3, Y=12, X=10, seed=0, rgb=False):
    rng = np.random.default_rng(seed)
    shape = (P, Q, Y, X, 3) if rgb else (P, Q, Y, X)
    return LightField(rng.random(shape), "rgb" if rgb else "luma")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
