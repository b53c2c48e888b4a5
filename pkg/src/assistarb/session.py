"""Live human-in-the-loop session loop.

Each control cycle: sample a fresh forecast, estimate every mechanism,
arbitrate with hysteresis and chunking, execute an action per the active
mode, and log the cycle. Teleoperation is entered by arbitration but
exited only by an accepted handback; discrete prompts pause the agent
until the human chooses, then the chosen cluster's mean trajectory runs
for the full prediction horizon before re-arbitration.

Every random draw flows from the session seed through a forecast counter,
so replaying a logged input sequence reproduces the trajectory
bit-for-bit.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .arbiter import ArbiterConfig, HysteresisState, apply_hysteresis, select_mechanism
from .environment import Environment
from .estimation import compute_estimates, compute_values
from .mechanisms import NO_ASSIST, MechanismKind
from .rollouts import NOISE_SIGMA, sample_rollouts
from .session_log import LogRecord, SessionLog

__all__ = [
    "MODE_BANNER",
    "DiscreteChoice",
    "CorrectionDelta",
    "TeleopAction",
    "Handback",
    "parse_input",
    "SessionConfig",
    "Frame",
    "Session",
    "ModeMismatchError",
    "SessionFinishedError",
    "apply_discrete_choice",
    "replay_session",
    "replay_log",
]

# Fixed mode-to-banner mapping (the hardware version used LED colors).
MODE_BANNER = {
    MechanismKind.NO_ASSIST: "white",
    MechanismKind.TELEOP: "green",
    MechanismKind.CORRECTIONS: "yellow",
    MechanismKind.DISCRETE: "red",
}


class ModeMismatchError(ValueError):
    """Input kind does not match the active assistance mode."""


class SessionFinishedError(RuntimeError):
    """The session has already reached the end of the test horizon."""


@dataclass(frozen=True)
class DiscreteChoice:
    index: int

    def to_wire(self) -> dict:
        return {"kind": "discrete", "payload": {"index": self.index}}


@dataclass(frozen=True)
class CorrectionDelta:
    deltas: tuple[float, ...]

    def to_wire(self) -> dict:
        return {"kind": "correction", "payload": {"deltas": list(self.deltas)}}


@dataclass(frozen=True)
class TeleopAction:
    target: tuple[float, ...]

    def to_wire(self) -> dict:
        return {"kind": "teleop", "payload": {"target": list(self.target)}}


@dataclass(frozen=True)
class Handback:
    def to_wire(self) -> dict:
        return {"kind": "handback", "payload": None}


HumanInput = DiscreteChoice | CorrectionDelta | TeleopAction | Handback


def parse_input(data: dict) -> HumanInput:
    """Wire message -> HumanInput; raises ValueError on malformed payloads."""
    if not isinstance(data, dict) or "kind" not in data:
        raise ValueError("input message must be an object with a 'kind'")
    kind = data["kind"]
    payload = data.get("payload")
    if kind == "discrete":
        if not isinstance(payload, dict) or not isinstance(payload.get("index"), int):
            raise ValueError("discrete payload needs an integer 'index'")
        return DiscreteChoice(payload["index"])
    if kind == "correction":
        if not isinstance(payload, dict) or "deltas" not in payload:
            raise ValueError("correction payload needs 'deltas'")
        deltas = payload["deltas"]
        if not isinstance(deltas, (list, tuple)) or not all(
            isinstance(d, (int, float)) for d in deltas
        ):
            raise ValueError("correction deltas must be numbers")
        return CorrectionDelta(tuple(float(d) for d in deltas))
    if kind == "teleop":
        if not isinstance(payload, dict) or "target" not in payload:
            raise ValueError("teleop payload needs 'target'")
        target = payload["target"]
        if not isinstance(target, (list, tuple)) or not all(
            isinstance(v, (int, float)) for v in target
        ):
            raise ValueError("teleop target must be a number vector")
        return TeleopAction(tuple(float(v) for v in target))
    if kind == "handback":
        return Handback()
    raise ValueError(f"unknown input kind {kind!r}")


@dataclass(frozen=True)
class SessionConfig:
    """Arbiter config plus live-loop parameters."""

    arbiter: ArbiterConfig
    seed: int = 0
    n_r: int = 50
    prediction_horizon: int = 64
    p_collapse: float = 0.0
    noise_sigma: float = NOISE_SIGMA
    kmeans_restarts: int = 10
    max_step_length: float = 0.08
    max_correction: float = 0.05
    control_rate_hz: float = 10.0


@dataclass
class Frame:
    """One cycle's state snapshot for the client."""

    t: int
    position: tuple[float, float]
    mode: MechanismKind
    values: dict[str, float]
    rollouts: list | None
    prompt: dict | None
    done: bool

    @property
    def banner(self) -> str:
        return MODE_BANNER[self.mode]

    def to_payload(self) -> dict:
        return {
            "t": self.t,
            "pos": [round(float(v), 5) for v in self.position],
            "mode": self.mode.value,
            "values": {k: round(float(v), 5) for k, v in self.values.items()},
            "rollouts": self.rollouts,
            "prompt": self.prompt,
            "done": self.done,
        }


class Session:
    """Owns all mutable session state; exactly one logical writer."""

    def __init__(self, env: Environment, config: SessionConfig):
        if config.arbiter.horizon > config.prediction_horizon:
            raise ValueError("estimate horizon exceeds prediction horizon")
        self.env = env
        self.config = config
        self.t = 0
        self.position = env.backbone()[0].copy()
        self.mode = MechanismKind.NO_ASSIST
        self.done = False
        self.log = SessionLog(seed=config.seed, env_seed=env.seed)
        self.position_history: list[np.ndarray] = [self.position.copy()]

        self._hysteresis = HysteresisState.from_config(config.arbiter)
        self._cycle = 0
        self._forecast_counter = 0
        self._exec_forecast: np.ndarray | None = None
        self._chunk_pos = 0
        self._pending_means: np.ndarray | None = None  # (n_d, n_a, H)
        self._committed: deque[np.ndarray] = deque()
        self._cached_directions: np.ndarray | None = None  # (n_c, n_a)
        self._last_values: dict[str, float] = {}
        self._last_preview: list | None = None

    # -- helpers -----------------------------------------------------------

    def _validate_input(self, human_input: HumanInput) -> None:
        expected = {
            DiscreteChoice: MechanismKind.DISCRETE,
            CorrectionDelta: MechanismKind.CORRECTIONS,
            TeleopAction: MechanismKind.TELEOP,
            Handback: MechanismKind.TELEOP,
        }[type(human_input)]
        if self.mode is not expected:
            raise ModeMismatchError(
                f"{type(human_input).__name__} input rejected: active mode is {self.mode.value}"
            )
        if isinstance(human_input, CorrectionDelta):
            n_c = self._cached_directions.shape[0] if self._cached_directions is not None else 0
            if len(human_input.deltas) != n_c:
                raise ValueError(
                    f"correction delta size {len(human_input.deltas)} does not match "
                    f"{n_c} controlled dimensions"
                )
        if isinstance(human_input, TeleopAction):
            target = np.asarray(human_input.target, dtype=float)
            if target.shape != (self.config.arbiter.n_a,) or not np.isfinite(target).all():
                raise ValueError("teleop target must be a finite action-sized vector")
            ranges = self.config.arbiter.ranges
            if np.any(target < ranges[:, 0]) or np.any(target > ranges[:, 1]):
                raise ValueError("teleop target outside configured action ranges")

    def _sample_forecast(self) -> np.ndarray:
        cfg = self.config
        tensor = sample_rollouts(
            self.env, self.position, self.t, n_r=cfg.n_r,
            horizon=cfg.prediction_horizon,
            seed=[cfg.seed, 1, self._forecast_counter],
            p_collapse=cfg.p_collapse, noise_sigma=cfg.noise_sigma,
        )
        self._forecast_counter += 1
        return tensor

    def _estimate(self, tensor: np.ndarray):
        cfg = self.config
        window = tensor[:, :, : cfg.arbiter.horizon]
        estimates = compute_estimates(
            window, cfg.arbiter, seed_key=[cfg.seed, 2, self._forecast_counter],
            restarts=cfg.kmeans_restarts,
        )
        values = compute_values(estimates, cfg.arbiter)
        self._last_values = {v.mechanism.label(): v.value for v in values}
        self._last_preview = _preview(tensor)
        return estimates, values

    def _robot_confident(self) -> bool:
        if not self._last_values:
            return False
        na = self._last_values.get(MechanismKind.NO_ASSIST.value)
        if na is None:
            return False
        return all(na >= v for k, v in self._last_values.items()
                   if k != MechanismKind.NO_ASSIST.value)

    def _prompt(self) -> dict | None:
        if self.mode is MechanismKind.DISCRETE and self._pending_means is not None:
            return {"kind": "discrete", "n_choices": int(self._pending_means.shape[0])}
        if self.mode is MechanismKind.TELEOP:
            return {"kind": "teleop"}
        if self.mode is MechanismKind.CORRECTIONS and self._cached_directions is not None:
            axes = [[round(float(x), 5) for x in row] for row in self._cached_directions]
            return {"kind": "correction", "axis": axes[0] if len(axes) == 1 else axes}
        return None

    def _frame(self) -> Frame:
        return Frame(
            t=self.t,
            position=(float(self.position[0]), float(self.position[1])),
            mode=self.mode,
            values=dict(self._last_values),
            rollouts=self._last_preview,
            prompt=self._prompt(),
            done=self.done,
        )

    def _record(self, human_input: HumanInput | None, action: np.ndarray | None,
                discrete_choice: int | None = None) -> None:
        self.log.append(LogRecord(
            cycle=self._cycle,
            t=self.t,
            mode=self.mode.value,
            input=human_input.to_wire() if human_input is not None else None,
            action=(float(action[0]), float(action[1])) if action is not None else None,
            discrete_choice=discrete_choice,
        ))

    def _execute(self, action: np.ndarray) -> None:
        self.position = np.asarray(action, dtype=float).copy()
        self.position_history.append(self.position.copy())
        self.t += 1
        if self.t >= self.env.test_horizon:
            self.done = True

    def snapshot(self) -> Frame:
        """Current state as a frame, without advancing the session."""
        return self._frame()

    # -- the control cycle ---------------------------------------------------

    def step(self, human_input: HumanInput | None = None) -> Frame:
        """Advance one control cycle; returns the frame to stream.

        Raises ModeMismatchError (input kind vs active mode) or ValueError
        (invalid payload) without changing any session state.
        """
        if self.done:
            raise SessionFinishedError("session already finished")
        if human_input is not None:
            self._validate_input(human_input)

        if self.mode is MechanismKind.DISCRETE:
            frame = self._step_discrete(human_input)
        elif self.mode is MechanismKind.TELEOP:
            frame = self._step_teleop(human_input)
        else:
            frame = self._step_autonomous(human_input)
        self._cycle += 1
        return frame

    def _step_discrete(self, human_input: HumanInput | None) -> Frame:
        if human_input is None:
            # Paused awaiting the choice; time does not advance.
            self._record(None, None)
            return self._frame()
        choice = human_input
        apply_discrete_choice(self, choice.index)
        self.mode = MechanismKind.NO_ASSIST
        self._hysteresis.current = NO_ASSIST
        self._hysteresis.chunk_remaining = 0
        action = self._committed.popleft()
        self._record(choice, action, discrete_choice=choice.index)
        self._execute(action)
        return self._frame()

    def _step_teleop(self, human_input: HumanInput | None) -> Frame:
        if human_input is None:
            # Hold in place; estimates stay from the last executed cycle.
            self._record(None, None)
            return self._frame()
        if isinstance(human_input, Handback):
            if self._robot_confident():
                self.mode = MechanismKind.NO_ASSIST
                self._hysteresis.current = NO_ASSIST
                self._hysteresis.chunk_remaining = 0
                self._hysteresis.teleop_run = 0
            self._record(human_input, None)
            return self._frame()
        target = np.asarray(human_input.target, dtype=float)
        step_vec = target - self.position
        norm = float(np.linalg.norm(step_vec))
        if norm > self.config.max_step_length:
            target = self.position + step_vec * (self.config.max_step_length / norm)
        self._record(human_input, target)
        self._execute(target)
        if not self.done:
            # Refresh values at the new state so the handback signal tracks
            # robot confidence while the human drives.
            self._estimate(self._sample_forecast())
        return self._frame()

    def _step_autonomous(self, human_input: HumanInput | None) -> Frame:
        if self._committed:
            # Finishing a chosen discrete behavior before re-arbitrating.
            action = self._committed.popleft()
            self.mode = MechanismKind.NO_ASSIST
            self._record(human_input, action)
            self._execute(action)
            return self._frame()

        tensor = self._sample_forecast()
        estimates, values = self._estimate(tensor)
        candidate = select_mechanism(values)
        decision = apply_hysteresis(self._hysteresis, candidate, values)
        if decision.new_chunk:
            self._exec_forecast = tensor
            self._chunk_pos = 0
        kind = decision.selected.kind

        if kind is MechanismKind.DISCRETE:
            est = next(e for e in estimates if e.mechanism == decision.selected)
            members = est.cluster_assignments
            n_d = decision.selected.arity
            means = np.stack([
                tensor[:, members == j, :].mean(axis=1) if (members == j).any()
                else tensor.mean(axis=1)
                for j in range(n_d)
            ])
            self._pending_means = means
            self.mode = MechanismKind.DISCRETE
            self._record(human_input, None)
            return self._frame()

        if kind is MechanismKind.TELEOP:
            self.mode = MechanismKind.TELEOP
            self._record(human_input, None)
            return self._frame()

        robot_action = self._exec_forecast[:, 0, self._chunk_pos]
        self._chunk_pos = min(self._chunk_pos + 1, self._exec_forecast.shape[2] - 1)

        if kind is MechanismKind.CORRECTIONS:
            est = next(e for e in estimates if e.mechanism == decision.selected)
            if self.mode is not MechanismKind.CORRECTIONS:
                # Cache the correction directions at entry for continuity.
                self._cached_directions = est.principal_directions[0].copy()
            self.mode = MechanismKind.CORRECTIONS
            action = robot_action.copy()
            if isinstance(human_input, CorrectionDelta):
                deltas = np.clip(np.asarray(human_input.deltas, dtype=float),
                                 -self.config.max_correction, self.config.max_correction)
                action = action + deltas @ self._cached_directions
            self._record(human_input, action)
            self._execute(action)
            return self._frame()

        self.mode = MechanismKind.NO_ASSIST
        self._cached_directions = None
        self._record(human_input, robot_action)
        self._execute(robot_action)
        return self._frame()


def _preview(tensor: np.ndarray, limit: int = 20) -> list:
    """Downsample a forecast to at most ``limit`` client polylines."""
    k = min(limit, tensor.shape[1])
    return [
        [[round(float(x), 4), round(float(y), 4)] for x, y in tensor[:, i, :].T]
        for i in range(k)
    ]


def apply_discrete_choice(session: Session, index: int) -> np.ndarray:
    """Commit the chosen cluster's mean trajectory for the full horizon.

    Returns the committed (horizon, n_a) action segment and queues it for
    execution. Requires an active discrete prompt; the index must be one
    of the offered choices.
    """
    if session.mode is not MechanismKind.DISCRETE or session._pending_means is None:
        raise ModeMismatchError("no discrete prompt is active")
    n_d = session._pending_means.shape[0]
    if not 0 <= index < n_d:
        raise ValueError(f"choice index {index} out of range [0, {n_d})")
    actions = session._pending_means[index].T.copy()  # (H, n_a)
    session._committed = deque(np.asarray(a) for a in actions)
    session._pending_means = None
    return actions


def replay_session(env: Environment, config: SessionConfig,
                   inputs: Iterable[dict | HumanInput | None]) -> Session:
    """Re-run a session feeding the given per-cycle inputs in order."""
    session = Session(env, config)
    for item in inputs:
        if session.done:
            break
        if isinstance(item, dict):
            item = parse_input(item)
        session.step(item)
    return session


def replay_log(env: Environment, config: SessionConfig, log: SessionLog) -> Session:
    """Replay the logged human inputs cycle-for-cycle."""
    return replay_session(env, config, (r.input for r in log.records))
