"""One estimation pass: every configured mechanism against one tensor.

Shared by the offline evaluation harness and the live session loop so
both arbitrate from identical numbers given identical seeds.
"""

from __future__ import annotations

import numpy as np

from .arbiter import DEFAULT_LAMBDAS, ArbiterConfig, MechanismValue, mechanism_value, select_mechanism
from .entropy import DEFAULT_BETA
from .environment import Environment
from .mechanisms import (
    NO_ASSIST,
    TELEOP,
    MechanismEstimate,
    MechanismKind,
    corrections,
    discrete,
    estimate_corrections,
    estimate_discrete,
    estimate_no_assist,
    estimate_teleop,
)
from .rollouts import sample_trajectory

__all__ = ["compute_estimates", "compute_values", "arbitrate", "default_config_for"]


def compute_estimates(tensor: np.ndarray, config: ArbiterConfig, seed_key=(),
                      restarts: int = 10, n_synth: int | None = None) -> list[MechanismEstimate]:
    """Run every configured mechanism's estimator on one rollout tensor.

    ``seed_key`` is a sequence of ints; each seeded estimator derives its
    own stream by appending its mechanism index, so results are
    bit-reproducible for a fixed key.
    """
    key = list(seed_key)
    n_a = tensor.shape[0]
    horizon = tensor.shape[2]
    estimates = []
    for idx, mech in enumerate(config.mechanisms):
        if mech.kind is MechanismKind.NO_ASSIST:
            est = estimate_no_assist(tensor, config.beta)
        elif mech.kind is MechanismKind.DISCRETE:
            est = estimate_discrete(tensor, mech.arity, config.beta,
                                    restarts=restarts, seed=key + [idx])
        elif mech.kind is MechanismKind.CORRECTIONS:
            est = estimate_corrections(tensor, mech.arity, config.beta,
                                       n_synth=n_synth, seed=key + [idx])
        else:
            est = estimate_teleop(n_a, horizon, config.beta)
        estimates.append(est)
    return estimates


def compute_values(estimates, config: ArbiterConfig) -> list[MechanismValue]:
    return [mechanism_value(est, config) for est in estimates]


def arbitrate(tensor: np.ndarray, config: ArbiterConfig, seed_key=(),
              restarts: int = 10):
    """Estimates, values, and the argmax selection for one tensor."""
    estimates = compute_estimates(tensor, config, seed_key=seed_key, restarts=restarts)
    values = compute_values(estimates, config)
    return estimates, values, select_mechanism(values)


def default_config_for(env: Environment, beta: float = DEFAULT_BETA,
                       horizon: int = 16, n_train: int = 100,
                       ranges_seed: int = 90001) -> ArbiterConfig:
    """Standard four-mechanism config for an environment.

    Action ranges come from the min/max of sampled training-style
    trajectories, the same way a deployment would take them from its
    training data.
    """
    trajs = np.stack([sample_trajectory(env, [ranges_seed, i]) for i in range(n_train)])
    lo = trajs.min(axis=(0, 1))
    hi = trajs.max(axis=(0, 1))
    return ArbiterConfig(
        mechanisms=(NO_ASSIST, discrete(2), corrections(1), TELEOP),
        lambdas=dict(DEFAULT_LAMBDAS),
        beta=beta,
        ranges=np.stack([lo, hi], axis=1),
        horizon=horizon,
    )
