import sys
import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def full_rank(rng, n, p, cond_max=1e4):
    """Random Gaussian matrix, redrawn until reasonably conditioned."""
    while True:
        z = rng.standard_normal((n, p))
        s = np.linalg.svd(z, compute_uv=False)
        if s[-1] > 0 and s[0] / s[-1] < cond_max:
            return z


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(mod.RESULTS, key=lambda s: int(s.split("AC")[1].split()[0])):
        terminalreporter.write_line(line)
