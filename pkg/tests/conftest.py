import numpy as np
import pytest

from mlsa_risk.sampling import LossModel
from mlsa_risk.swap import PAPER_SWAP, SwapLossModel


class NoInnerNoise(LossModel):
    """phi(y, z) = y: every biased loss equals the exact one."""

    def __init__(self, scale=1.0):
        self.scale = scale

    def sample_outer(self, size, rng):
        return self.scale * rng.standard_normal(size)

    def sample_payoff(self, y, rng):
        rng.standard_normal(len(y))  # burn draws like a real payoff would
        return np.asarray(y, float).copy()

    def exact_loss(self, y):
        return np.asarray(y, float)


class ShiftedGaussian(LossModel):
    """phi(y, z) = y + z with Var(z) = s2, so Var(phi | Y) = s2."""

    def __init__(self, s2=4.0):
        self.s2 = s2

    def sample_outer(self, size, rng):
        return rng.standard_normal(size)

    def sample_payoff(self, y, rng):
        return np.asarray(y, float) + np.sqrt(self.s2) * rng.standard_normal(len(y))

    def exact_loss(self, y):
        return np.asarray(y, float)


@pytest.fixture
def swap_model():
    return SwapLossModel(PAPER_SWAP)


@pytest.fixture
def swap_params():
    return PAPER_SWAP


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
