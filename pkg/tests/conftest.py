import numpy as np
import pytest

from sgf.config import ExperimentConfig, RadioConfig


@pytest.fixture
def radio() -> RadioConfig:
    return ExperimentConfig().radio()


@pytest.fixture
def unit_radio() -> RadioConfig:
    """Unit noise and GBU power so hand-computed examples read directly."""
    return RadioConfig(noise_power=1.0, gbu_power=1.0, gfu_max_snr=2.0, target_rate=1.0)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)


_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def report():
    """Record one acceptance line; printed together at the end of the run."""

    def record(criterion: str, passed: bool, detail: str) -> bool:
        _ACCEPTANCE_LINES.append(f"{'PASS' if passed else 'FAIL'} {criterion}: {detail}")
        print(_ACCEPTANCE_LINES[-1])
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
