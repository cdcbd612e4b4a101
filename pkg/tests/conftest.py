import numpy as np
import pytest

from gmimo.channel_model import ScenarioConfig, generate_channels

# Simulation setup of the reference experiments: 4x4 link, 15 channel uses
# per slot, 8 single-antenna interferers, SNR 10 dB.
REFERENCE = dict(N=4, n0=4, M=15, T=10, K=8, snr_db=10.0, sir_db=0.0)


def scenario(**overrides) -> ScenarioConfig:
    kw = dict(REFERENCE)
    kw.update(overrides)
    return ScenarioConfig.from_db(**kw)


@pytest.fixture
def rng():
    return np.random.default_rng(20261014)


@pytest.fixture(scope="session")
def reference_channels():
    return generate_channels(scenario(seed=1))


def random_hpd(rng, n, m=None, shift=0.0):
    m = m or 2 * n
    A = (rng.standard_normal((n, m)) + 1j * rng.standard_normal((n, m))) / np.sqrt(2)
    S = A @ A.conj().T / m + shift * np.eye(n)
    return 0.5 * (S + S.conj().T)


def random_psd(rng, n, rank):
    A = (rng.standard_normal((n, rank)) + 1j * rng.standard_normal((n, rank))) / np.sqrt(2)
    S = A @ A.conj().T
    return 0.5 * (S + S.conj().T)


# Acceptance reporting --------------------------------------------------------

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
