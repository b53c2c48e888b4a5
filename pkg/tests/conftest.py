import numpy as np
import pytest

from assistarb.arbiter import ArbiterConfig, DEFAULT_LAMBDAS
from assistarb.environment import GenerationConfig, generate_environment
from assistarb.estimation import default_config_for
from assistarb.mechanisms import NO_ASSIST, TELEOP, corrections, discrete

ACCEPTANCE_LINES: list[str] = []


def record_criterion(name: str, ok: bool, detail: str) -> None:
    ACCEPTANCE_LINES.append(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

# Compact environments keep step-level tests fast; geometry ratios match
# the full-size defaults.
SMALL_GEN = GenerationConfig(
    horizon_total=200,
    tail_repeat=40,
    n_teleop=(1, 1),
    n_corrective=(1, 1),
    n_junction=(1, 1),
    teleop_len=(28, 32),
    corrective_len=(22, 26),
    junction_len=(20, 24),
    min_gap=10,
    edge_margin=12,
)


@pytest.fixture(scope="session")
def small_env():
    return generate_environment(3, SMALL_GEN)


@pytest.fixture(scope="session")
def small_config(small_env):
    return default_config_for(small_env, n_train=50)


@pytest.fixture(scope="session")
def full_env():
    return generate_environment(100)


@pytest.fixture(scope="session")
def full_config(full_env):
    return default_config_for(full_env)


def box_config(horizon=16, n_a=2, beta=1e6, lo=-0.5, hi=1.5):
    """Arbiter config over a fixed action box, for tensor-level tests."""
    ranges = np.array([[lo, hi]] * n_a)
    return ArbiterConfig(
        mechanisms=(NO_ASSIST, discrete(2), corrections(1), TELEOP),
        lambdas=dict(DEFAULT_LAMBDAS),
        beta=beta,
        ranges=ranges,
        horizon=horizon,
    )
