"""Mechanism value computation and real-time selection.

Turns per-step post-intervention entropies into penalized likelihood
values normalized by the Gaussian lower and uniform upper entropy bounds,
enforces the input-cost penalization ordering (more required human input
must mean a strictly smaller penalization factor), selects the
highest-value mechanism, and applies teleoperation-entry hysteresis and
action chunking for stable live behavior.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .entropy import gaussian_entropy, uniform_entropy_upper
from .mechanisms import (
    KIND_ORDER,
    NO_ASSIST,
    TELEOP,
    MechanismEstimate,
    MechanismId,
    corrections,
    discrete,
)

__all__ = [
    "DEFAULT_LAMBDAS",
    "ArbiterConfig",
    "ConfigReport",
    "MechanismValue",
    "HysteresisState",
    "ArbiterDecision",
    "validate_config",
    "mechanism_value",
    "select_mechanism",
    "apply_hysteresis",
    "load_arbiter_config",
    "save_arbiter_config",
]

# Penalization factors as tuned in the original robot deployment; shipped
# as defaults, ordered no_assist > discrete(2) > corrections(1) > teleop.
DEFAULT_LAMBDAS = {
    NO_ASSIST: 1.0,
    discrete(2): 0.954,
    corrections(1): 0.885,
    TELEOP: 0.862,
}


@dataclass(frozen=True)
class ArbiterConfig:
    """Mechanism set, penalizations, bounds, and real-time parameters.

    ``ranges`` is the (n_a, 2) per-dimension action box that defines the
    uniform upper entropy bound; ``horizon`` is the estimate horizon T_r.
    """

    mechanisms: tuple[MechanismId, ...]
    lambdas: dict[MechanismId, float]
    beta: float
    ranges: np.ndarray
    horizon: int
    teleop_consecutive: int = 3
    chunk_steps: int = 8

    def __post_init__(self):
        object.__setattr__(self, "mechanisms", tuple(self.mechanisms))
        object.__setattr__(self, "ranges", np.asarray(self.ranges, dtype=float))
        if not self.mechanisms:
            raise ValueError("mechanism set is empty")
        if not self.beta > 0:
            raise ValueError("beta must be > 0")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.teleop_consecutive < 1 or self.chunk_steps < 1:
            raise ValueError("teleop_consecutive and chunk_steps must be >= 1")
        for mech in self.mechanisms:
            lam = self.lambdas.get(mech)
            if lam is None:
                raise ValueError(f"missing penalization for {mech.label()}")
            if not 0 < lam <= 1:
                raise ValueError(f"penalization for {mech.label()} must be in (0, 1], got {lam}")

    @property
    def n_a(self) -> int:
        return int(self.ranges.shape[0])

    @property
    def h_min(self) -> float:
        return gaussian_entropy(self.n_a, self.beta)

    @property
    def h_max(self) -> float:
        return uniform_entropy_upper(self.ranges)

    def input_cost(self, mech: MechanismId) -> float:
        return mech.input_cost(self.n_a, self.horizon)

    def to_dict(self) -> dict:
        return {
            "arbiter": {
                "mechanisms": [m.label() for m in self.mechanisms],
                "lambda": {m.label(): self.lambdas[m] for m in self.mechanisms},
                "beta": self.beta,
                "ranges": self.ranges.tolist(),
                "horizon": self.horizon,
                "teleop_consecutive": self.teleop_consecutive,
                "chunk_steps": self.chunk_steps,
            }
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ArbiterConfig":
        body = data["arbiter"] if "arbiter" in data else data
        mechanisms = tuple(MechanismId.parse(s) for s in body["mechanisms"])
        lambdas = {MechanismId.parse(s): float(v) for s, v in body["lambda"].items()}
        return cls(
            mechanisms=mechanisms,
            lambdas=lambdas,
            beta=float(body["beta"]),
            ranges=np.asarray(body["ranges"], dtype=float),
            horizon=int(body["horizon"]),
            teleop_consecutive=int(body.get("teleop_consecutive", 3)),
            chunk_steps=int(body.get("chunk_steps", 8)),
        )


def save_arbiter_config(config: ArbiterConfig, path) -> None:
    Path(path).write_text(json.dumps(config.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")


def load_arbiter_config(path) -> ArbiterConfig:
    return ArbiterConfig.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass
class ConfigReport:
    """Outcome of config validation; a violation is an ordered mechanism
    pair (higher-input, lower-input) whose penalizations are not strictly
    decreasing in input cost."""

    violations: tuple[tuple[MechanismId, MechanismId], ...] = ()
    errors: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations and not self.errors

    def describe(self) -> str:
        if self.ok:
            return "ok"
        lines = [f"penalization ordering violated for ({a.label()}, {b.label()})"
                 for a, b in self.violations]
        lines.extend(self.errors)
        return "; ".join(lines)


def validate_config(config: ArbiterConfig) -> ConfigReport:
    """Check the penalization ordering pairwise over the mechanism set.

    For every ordered pair with k_i > k_j the config must have
    lambda_i < lambda_j. Returns the full violation list rather than
    raising, so callers can report every offending pair at once.
    """
    violations = []
    for a in config.mechanisms:
        for b in config.mechanisms:
            if a is b:
                continue
            if config.input_cost(a) > config.input_cost(b) and not (
                config.lambdas[a] < config.lambdas[b]
            ):
                violations.append((a, b))
    errors = []
    if not config.h_max > config.h_min:
        errors.append(
            f"h_max {config.h_max:.4f} must exceed h_min {config.h_min:.4f}; "
            "widen the action ranges or lower beta"
        )
    return ConfigReport(violations=tuple(violations), errors=tuple(errors))


@dataclass(frozen=True)
class MechanismValue:
    """Penalized likelihood of a mechanism; always in [0, lambda_m]."""

    mechanism: MechanismId
    value: float
    human_input_k: float


def mechanism_value(estimate: MechanismEstimate, config: ArbiterConfig) -> MechanismValue:
    """Penalized, bound-normalized value of one mechanism estimate.

    value = lambda_m * (T*h_max - sum_t clamp(h_t, h_min, h_max))
            / (T * (h_max - h_min))

    Per-step entropies are clamped into [h_min, h_max] first, which pins
    the value into [0, lambda_m].
    """
    if estimate.horizon != config.horizon:
        raise ValueError(
            f"estimate horizon {estimate.horizon} != config horizon {config.horizon}"
        )
    lam = config.lambdas.get(estimate.mechanism)
    if lam is None:
        raise ValueError(f"mechanism {estimate.mechanism.label()} not in config")
    h_min, h_max = config.h_min, config.h_max
    clamped = np.clip(estimate.per_step_entropy, h_min, h_max)
    horizon = config.horizon
    value = lam * (horizon * h_max - float(clamped.sum())) / (horizon * (h_max - h_min))
    return MechanismValue(estimate.mechanism, value, estimate.human_input_k)


def select_mechanism(values) -> MechanismId:
    """Highest-value mechanism; ties break to the smallest human input k,
    then to the fixed kind order (no_assist, discrete, corrections, teleop)."""
    values = list(values)
    if not values:
        raise ValueError("no mechanism values to select from")
    best = min(values, key=lambda v: (-v.value, v.human_input_k, KIND_ORDER[v.mechanism.kind]))
    return best.mechanism


@dataclass
class HysteresisState:
    """Counters owned by a single session loop.

    ``current`` starts at no-assist: the agent is autonomous until the
    arbiter asks for help. ``chunk_remaining`` counts further steps served
    by the decision made at the start of the active chunk.
    """

    teleop_consecutive: int
    chunk_steps: int
    current: MechanismId = NO_ASSIST
    teleop_run: int = 0
    chunk_remaining: int = 0

    @classmethod
    def from_config(cls, config: ArbiterConfig) -> "HysteresisState":
        return cls(teleop_consecutive=config.teleop_consecutive, chunk_steps=config.chunk_steps)


@dataclass(frozen=True)
class ArbiterDecision:
    """Selected mechanism after hysteresis, plus all computed values.

    ``new_chunk`` is True when this decision starts a fresh action chunk
    (the executor should switch to the current forecast).
    """

    selected: MechanismId
    values: tuple[MechanismValue, ...]
    state: HysteresisState
    new_chunk: bool


def apply_hysteresis(state: HysteresisState, candidate: MechanismId,
                     values=()) -> ArbiterDecision:
    """Gate teleop entry and hold decisions within action chunks.

    Teleop is only emitted after ``teleop_consecutive`` successive teleop
    candidates; until then the previous non-teleop decision persists.
    Within an active chunk of ``chunk_steps`` the prior decision persists;
    a change of mechanism kind abandons the chunk immediately.
    """
    if candidate.kind is TELEOP.kind:
        state.teleop_run += 1
    else:
        state.teleop_run = 0

    effective = candidate
    if (
        candidate.kind is TELEOP.kind
        and state.current.kind is not TELEOP.kind
        and state.teleop_run < state.teleop_consecutive
    ):
        effective = state.current

    new_chunk = False
    if effective.kind is state.current.kind and state.chunk_remaining > 0:
        selected = state.current
        state.chunk_remaining -= 1
    else:
        selected = effective
        state.chunk_remaining = state.chunk_steps - 1
        new_chunk = True
    state.current = selected
    return ArbiterDecision(selected=selected, values=tuple(values), state=state, new_chunk=new_chunk)
