"""Ground-truth evaluation harness.

Walks test trajectories step by step, runs the full estimation and
selection pipeline at every step, and scores the selections against the
environment's known per-step labels: confusion matrices (raw and with a
margin around label transitions excluded), pre-junction discrete
detection, the variance-gated teleoperation baseline, and the
control-timestep input metric.
"""

from __future__ import annotations

import enum
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .arbiter import ArbiterConfig
from .environment import Environment, Label, SegmentKind, label_code
from .estimation import arbitrate
from .mechanisms import MechanismKind
from .rollouts import NOISE_SIGMA, sample_rollouts, sample_trajectory
from .session_log import SessionLog

__all__ = [
    "GateMode",
    "SamplerSettings",
    "MarginPolicy",
    "ConfusionMatrix",
    "GateStats",
    "EnvironmentResult",
    "uateleop_gate",
    "input_metric",
    "default_input_weights",
    "evaluate_environment",
    "transition_margin_mask",
    "write_confusion_csv",
]


class GateMode(enum.Enum):
    ROBOT = "robot"
    HUMAN = "human"


# Row order of confusion matrices (actual labels); discrete is scored
# separately via pre-junction detection.
MATRIX_ROWS = (Label.NONE, Label.CORRECTIONS, Label.TELEOPERATION)
# Column order (estimated mechanisms).
MATRIX_COLS = (
    MechanismKind.NO_ASSIST,
    MechanismKind.CORRECTIONS,
    MechanismKind.TELEOP,
    MechanismKind.DISCRETE,
)

# Kind -> code aligned with label codes so that code equality means a
# correct classification.
KIND_CODE = {
    MechanismKind.NO_ASSIST: 0,
    MechanismKind.CORRECTIONS: 1,
    MechanismKind.TELEOP: 2,
    MechanismKind.DISCRETE: 3,
}


def uateleop_gate(tensor, gamma: float) -> GateMode:
    """Teleoperation-or-robot gate by total rollout action variance.

    Robot mode iff the unbiased per-step, per-dimension sample variances
    of the tensor sum to at most gamma over the estimate horizon.
    """
    A = np.asarray(tensor, dtype=float)
    if A.ndim != 3:
        raise ValueError(f"rollout tensor must be (n_a, n_r, T), got shape {A.shape}")
    total = float(A.var(axis=1, ddof=1).sum())
    return GateMode.ROBOT if total <= gamma else GateMode.HUMAN


def default_input_weights(config: ArbiterConfig) -> dict[str, float]:
    """Per-mode control-timestep weights: nothing for autonomy, the
    controlled dimension count for corrections, the full action dimension
    for teleoperation. Discrete costs per decision, not per cycle."""
    n_c = 0
    for mech in config.mechanisms:
        if mech.kind is MechanismKind.CORRECTIONS:
            n_c = max(n_c, mech.arity)
    return {
        MechanismKind.NO_ASSIST.value: 0.0,
        MechanismKind.CORRECTIONS.value: float(n_c),
        MechanismKind.TELEOP.value: float(config.n_a),
        MechanismKind.DISCRETE.value: 0.0,
    }


def input_metric(log: SessionLog, weights) -> float:
    """Total human input in control-timesteps.

    Sum of per-mode weights over logged cycles plus one per discrete
    decision. Raises on modes missing from ``weights``.
    """
    total = 0.0
    for record in log.records:
        if record.mode not in weights:
            raise ValueError(f"unknown mode {record.mode!r} in session log")
        total += weights[record.mode]
    return total + log.discrete_decisions()


@dataclass(frozen=True)
class SamplerSettings:
    """Rollout sampling knobs for evaluation and live sessions."""

    n_r: int = 50
    horizon: int = 64
    p_collapse: float = 0.0
    noise_sigma: float = NOISE_SIGMA
    kmeans_restarts: int = 10


@dataclass(frozen=True)
class MarginPolicy:
    """Steps within ``margin_steps`` of a label transition are excluded
    from the filtered confusion matrix (finite-horizon forecasts blur
    decisions at boundaries)."""

    margin_steps: int

    def __post_init__(self):
        if self.margin_steps < 0:
            raise ValueError("margin_steps must be >= 0")


def transition_margin_mask(labels: np.ndarray, margin: int) -> np.ndarray:
    """Boolean mask of steps within ``margin`` of any label transition."""
    mask = np.zeros(labels.shape[0], dtype=bool)
    transitions = np.flatnonzero(labels[1:] != labels[:-1]) + 1
    for t0 in transitions:
        mask[max(0, t0 - margin):min(labels.shape[0], t0 + margin)] = True
    return mask


@dataclass
class ConfusionMatrix:
    """Row-normalized actual-vs-estimated frequencies with raw counts."""

    counts: np.ndarray  # (3, 4) int64

    @classmethod
    def from_records(cls, labels: np.ndarray, decisions: np.ndarray,
                     keep: np.ndarray | None = None) -> "ConfusionMatrix":
        """Tally (label, decision) pairs; ``labels`` broadcasts against
        ``decisions`` (n_test, n_steps). Discrete-labeled steps are skipped."""
        lab = np.broadcast_to(labels, decisions.shape)
        mask = lab < len(MATRIX_ROWS)
        if keep is not None:
            mask = mask & np.broadcast_to(keep, decisions.shape)
        counts = np.zeros((len(MATRIX_ROWS), len(MATRIX_COLS)), dtype=np.int64)
        np.add.at(counts, (lab[mask], decisions[mask]), 1)
        return cls(counts)

    def normalized(self) -> np.ndarray:
        totals = self.counts.sum(axis=1, keepdims=True)
        safe = np.maximum(totals, 1)
        return self.counts / safe

    def diagonal(self) -> dict[str, float]:
        norm = self.normalized()
        return {row.value: float(norm[i, i]) for i, row in enumerate(MATRIX_ROWS)}

    def to_dict(self) -> dict:
        norm = self.normalized()
        return {
            "rows": [row.value for row in MATRIX_ROWS],
            "cols": [col.value for col in MATRIX_COLS],
            "normalized": norm.tolist(),
            "counts": self.counts.tolist(),
        }


def write_confusion_csv(matrix: ConfusionMatrix, path) -> None:
    norm = matrix.normalized()
    lines = ["actual," + ",".join(col.value for col in MATRIX_COLS) + ",row_count"]
    for i, row in enumerate(MATRIX_ROWS):
        cells = ",".join(f"{norm[i, j]:.6f}" for j in range(len(MATRIX_COLS)))
        lines.append(f"{row.value},{cells},{int(matrix.counts[i].sum())}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


@dataclass
class GateStats:
    """Per-label human/robot tallies for the variance-gated baseline."""

    human: np.ndarray  # (4,) human-mode counts per actual label
    total: np.ndarray
    human_filtered: np.ndarray
    total_filtered: np.ndarray

    def human_rate(self, label: Label, filtered: bool = False) -> float:
        i = label_code(label)
        human = self.human_filtered if filtered else self.human
        total = self.total_filtered if filtered else self.total
        return float(human[i] / total[i]) if total[i] else float("nan")

    def robot_rate(self, label: Label, filtered: bool = False) -> float:
        rate = self.human_rate(label, filtered)
        return float("nan") if np.isnan(rate) else 1.0 - rate


@dataclass
class EnvironmentResult:
    """Everything measured on one environment."""

    env_seed: int
    n_test: int
    steps: np.ndarray
    labels: np.ndarray
    decisions: np.ndarray  # (n_test, len(steps)) mechanism-kind codes
    margin_steps: int
    margin_mask: np.ndarray
    confusion_raw: ConfusionMatrix
    confusion_filtered: ConfusionMatrix
    detection_hits: int
    detection_total: int
    gate: GateStats | None
    timing_seconds: np.ndarray
    trajectory_failures: tuple[int, ...] = field(default_factory=tuple)

    @property
    def detection_rate(self) -> float:
        return self.detection_hits / self.detection_total if self.detection_total else float("nan")

    def error_boundary_fraction(self) -> float:
        """Fraction of raw-matrix errors lying within the transition margin."""
        lab = np.broadcast_to(self.labels[None, :], self.decisions.shape)
        rows = lab < len(MATRIX_ROWS)
        errors = rows & (self.decisions != lab)
        near = np.broadcast_to(self.margin_mask[None, :], self.decisions.shape)
        n_errors = int(errors.sum())
        return float((errors & near).sum() / n_errors) if n_errors else float("nan")

    def timing_percentiles_ms(self) -> dict[str, float]:
        if self.timing_seconds.size == 0:
            return {}
        p50, p90, p99 = np.percentile(self.timing_seconds, [50, 90, 99])
        return {"p50": p50 * 1e3, "p90": p90 * 1e3, "p99": p99 * 1e3}

    def to_report(self) -> dict:
        report = {
            "env_seed": self.env_seed,
            "n_test": self.n_test,
            "steps_evaluated": int(self.steps.size),
            "margin_steps": self.margin_steps,
            "confusion_raw": self.confusion_raw.to_dict(),
            "confusion_filtered": self.confusion_filtered.to_dict(),
            "diagonal_raw": self.confusion_raw.diagonal(),
            "diagonal_filtered": self.confusion_filtered.diagonal(),
            "discrete_detection": {
                "hits": self.detection_hits,
                "total": self.detection_total,
                "rate": self.detection_rate,
            },
            "error_boundary_fraction": self.error_boundary_fraction(),
            "timing_ms": self.timing_percentiles_ms(),
            "trajectory_failures": list(self.trajectory_failures),
        }
        if self.gate is not None:
            report["baseline_gate"] = {
                "human_on_teleoperation_raw": self.gate.human_rate(Label.TELEOPERATION),
                "human_on_teleoperation_filtered": self.gate.human_rate(Label.TELEOPERATION, True),
                "robot_on_none_raw": self.gate.robot_rate(Label.NONE),
                "robot_on_none_filtered": self.gate.robot_rate(Label.NONE, True),
            }
        return report


def _junction_windows(env: Environment, horizon: int) -> list[np.ndarray]:
    windows = []
    for seg in env.segments:
        if seg.kind is SegmentKind.DISCRETE_JUNCTION:
            windows.append(np.arange(max(0, seg.start_t - horizon), seg.start_t))
    return windows


def _evaluate_trajectory(env: Environment, config: ArbiterConfig,
                         sampler: SamplerSettings, steps: np.ndarray,
                         traj_index: int, eval_seed: int,
                         gamma: float | None):
    traj = sample_trajectory(env, [eval_seed, traj_index], noise_sigma=sampler.noise_sigma)
    horizon = config.horizon
    decisions = np.empty(steps.size, dtype=np.int8)
    gate_human = np.zeros(steps.size, dtype=bool)
    timing = np.empty(steps.size, dtype=np.float64)
    for si, t in enumerate(steps):
        t = int(t)
        rng = np.random.default_rng([eval_seed, traj_index, t])
        tensor = sample_rollouts(
            env, traj[t], t, n_r=sampler.n_r, horizon=sampler.horizon,
            rng=rng, p_collapse=sampler.p_collapse, noise_sigma=sampler.noise_sigma,
        )
        window = tensor[:, :, :horizon]
        tic = time.perf_counter()
        _, _, selected = arbitrate(window, config, seed_key=[eval_seed, traj_index, t],
                                   restarts=sampler.kmeans_restarts)
        timing[si] = time.perf_counter() - tic
        decisions[si] = KIND_CODE[selected.kind]
        if gamma is not None:
            gate_human[si] = uateleop_gate(window, gamma) is GateMode.HUMAN
    return traj_index, decisions, gate_human, timing


def evaluate_environment(env: Environment, n_test: int, config: ArbiterConfig,
                         sampler: SamplerSettings | None = None,
                         margin: MarginPolicy | None = None,
                         baseline_gamma: float | None = None,
                         seed: int = 0, workers: int | None = None,
                         detection_only: bool = False,
                         progress=None) -> EnvironmentResult:
    """Score every step of ``n_test`` trajectories against ground truth.

    Per step: sample rollouts at the trajectory's state, run all mechanism
    estimates, select by penalized value, and compare to the label.
    Discrete-labeled steps are excluded from the matrices; junctions are
    instead scored as detected when a discrete selection occurs within
    the ``config.horizon`` steps preceding junction entry. With
    ``detection_only`` just those pre-junction windows are evaluated.
    Per-trajectory failures are recorded, not fatal.
    """
    sampler = sampler or SamplerSettings()
    margin_steps = config.horizon if margin is None else margin.margin_steps
    if margin_steps > config.horizon:
        raise ValueError(f"margin {margin_steps} exceeds estimate horizon {config.horizon}")

    labels = env.labels()
    windows = _junction_windows(env, config.horizon)
    if detection_only:
        steps = (np.unique(np.concatenate(windows)) if windows
                 else np.empty(0, dtype=int))
    else:
        steps = np.arange(env.test_horizon)

    decisions = np.full((n_test, steps.size), -1, dtype=np.int8)
    gate_human = np.zeros((n_test, steps.size), dtype=bool)
    timing_parts = []
    failures = []

    def consume(result):
        traj_index, dec, gate, timing = result
        decisions[traj_index] = dec
        gate_human[traj_index] = gate
        timing_parts.append(timing)
        if progress is not None:
            progress(1)

    last_error = None
    if workers and workers > 1 and n_test > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = {
                pool.submit(_evaluate_trajectory, env, config, sampler, steps,
                            i, seed, baseline_gamma): i
                for i in range(n_test)
            }
            for future in futures:
                try:
                    consume(future.result())
                except Exception as exc:
                    failures.append(futures[future])
                    last_error = exc
    else:
        for i in range(n_test):
            try:
                consume(_evaluate_trajectory(env, config, sampler, steps, i, seed, baseline_gamma))
            except Exception as exc:
                failures.append(i)
                last_error = exc

    if len(failures) == n_test and last_error is not None:
        raise last_error

    ok_rows = np.array([i for i in range(n_test) if i not in failures], dtype=int)
    decisions = decisions[ok_rows]
    gate_human = gate_human[ok_rows]

    step_labels = labels[steps]
    margin_mask = transition_margin_mask(labels, margin_steps)[steps]
    keep_filtered = ~margin_mask

    confusion_raw = ConfusionMatrix.from_records(step_labels, decisions)
    confusion_filtered = ConfusionMatrix.from_records(step_labels, decisions, keep=keep_filtered)

    detection_total = len(windows) * decisions.shape[0]
    detection_hits = 0
    for window in windows:
        pos = np.searchsorted(steps, window)
        ok = pos < steps.size
        pos = np.where(ok, pos, 0)
        ok &= steps[pos] == window
        idx = pos[ok]
        if idx.size:
            detection_hits += int((decisions[:, idx] == KIND_CODE[MechanismKind.DISCRETE]).any(axis=1).sum())

    gate = None
    if baseline_gamma is not None:
        human = np.zeros(4, dtype=np.int64)
        total = np.zeros(4, dtype=np.int64)
        human_f = np.zeros(4, dtype=np.int64)
        total_f = np.zeros(4, dtype=np.int64)
        lab = np.broadcast_to(step_labels[None, :], gate_human.shape)
        keep = np.broadcast_to(keep_filtered[None, :], gate_human.shape)
        for code in range(4):
            at = lab == code
            total[code] = at.sum()
            human[code] = gate_human[at].sum()
            total_f[code] = (at & keep).sum()
            human_f[code] = gate_human[at & keep].sum()
        gate = GateStats(human=human, total=total, human_filtered=human_f, total_filtered=total_f)

    timing = np.concatenate(timing_parts) if timing_parts else np.empty(0)
    return EnvironmentResult(
        env_seed=env.seed,
        n_test=decisions.shape[0],
        steps=steps,
        labels=step_labels,
        decisions=decisions,
        margin_steps=margin_steps,
        margin_mask=margin_mask,
        confusion_raw=confusion_raw,
        confusion_filtered=confusion_filtered,
        detection_hits=detection_hits,
        detection_total=detection_total,
        gate=gate,
        timing_seconds=timing,
        trajectory_failures=tuple(failures),
    )


def combine_results(results) -> dict:
    """Aggregate per-environment reports plus pooled matrices."""
    results = list(results)
    raw = ConfusionMatrix(sum((r.confusion_raw.counts for r in results),
                              np.zeros((3, 4), dtype=np.int64)))
    filt = ConfusionMatrix(sum((r.confusion_filtered.counts for r in results),
                               np.zeros((3, 4), dtype=np.int64)))
    hits = sum(r.detection_hits for r in results)
    total = sum(r.detection_total for r in results)
    report = {
        "environments": [r.to_report() for r in results],
        "pooled": {
            "confusion_raw": raw.to_dict(),
            "confusion_filtered": filt.to_dict(),
            "diagonal_raw": raw.diagonal(),
            "diagonal_filtered": filt.diagonal(),
            "discrete_detection": {
                "hits": hits,
                "total": total,
                "rate": hits / total if total else float("nan"),
            },
        },
    }
    gates = [r.gate for r in results if r.gate is not None]
    if gates:
        human = sum(g.human for g in gates)
        total_g = sum(g.total for g in gates)
        human_f = sum(g.human_filtered for g in gates)
        total_f = sum(g.total_filtered for g in gates)
        pooled = GateStats(human, total_g, human_f, total_f)
        report["pooled"]["baseline_gate"] = {
            "human_on_teleoperation_raw": pooled.human_rate(Label.TELEOPERATION),
            "human_on_teleoperation_filtered": pooled.human_rate(Label.TELEOPERATION, True),
            "robot_on_none_raw": pooled.robot_rate(Label.NONE),
            "robot_on_none_filtered": pooled.robot_rate(Label.NONE, True),
        }
    return report


def write_report(report: dict, path) -> None:
    Path(path).write_text(json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8")
