"""Serpentine 2D benchmark environments.

An environment is a smooth backbone path (a chain of cubic Bezier spans
through random control points in the unit box) with typed, non-overlapping
uncertainty segments injected at random time steps. Segment kinds map
one-to-one onto assistance ground-truth labels, which makes per-step
estimation accuracy measurable.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "SegmentKind",
    "Label",
    "UncertaintySegment",
    "GenerationConfig",
    "Environment",
    "InfeasibleConfigError",
    "generate_environment",
    "ground_truth_label",
    "load_environment",
]


class InfeasibleConfigError(ValueError):
    """Requested segments cannot be placed without overlap."""


class SegmentKind(str, enum.Enum):
    TELEOP_2D = "teleop2d"
    CORRECTIVE_1D = "corrective1d"
    DISCRETE_JUNCTION = "discrete_junction"


class Label(str, enum.Enum):
    NONE = "none"
    CORRECTIONS = "corrections"
    TELEOPERATION = "teleoperation"
    DISCRETE = "discrete"


_KIND_TO_LABEL = {
    SegmentKind.TELEOP_2D: Label.TELEOPERATION,
    SegmentKind.CORRECTIVE_1D: Label.CORRECTIONS,
    SegmentKind.DISCRETE_JUNCTION: Label.DISCRETE,
}


@dataclass(frozen=True)
class UncertaintySegment:
    """A typed stretch of injected variability, [start_t, end_t) in steps."""

    kind: SegmentKind
    start_t: int
    end_t: int
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.end_t <= self.start_t:
            raise ValueError(f"segment end_t {self.end_t} must exceed start_t {self.start_t}")
        if self.kind in (SegmentKind.TELEOP_2D, SegmentKind.CORRECTIVE_1D):
            if not self.params.get("amplitude", 0.0) > 0:
                raise ValueError(f"{self.kind.value} segment needs amplitude > 0")
        if self.kind is SegmentKind.DISCRETE_JUNCTION:
            if int(self.params.get("branch_count", 0)) < 2:
                raise ValueError("junction needs branch_count >= 2")
            if not self.params.get("branch_offset", 0.0) > 0:
                raise ValueError("junction needs branch_offset > 0")

    @property
    def length(self) -> int:
        return self.end_t - self.start_t

    @property
    def label(self) -> Label:
        return _KIND_TO_LABEL[self.kind]


@dataclass(frozen=True)
class GenerationConfig:
    """Knobs for random environment generation.

    Count and length ranges are inclusive (lo, hi) pairs. Amplitudes and
    offsets are in environment coordinates (the unit box); frequency is in
    cycles per segment. The amplitude envelope is a trapezoid that ramps
    over ``envelope_ramp`` of the segment at each end, so variability is
    sustained mid-segment and vanishes at the boundaries.
    """

    n_control_points: tuple[int, int] = (4, 8)
    n_teleop: tuple[int, int] = (1, 2)
    n_corrective: tuple[int, int] = (1, 2)
    n_junction: tuple[int, int] = (1, 2)
    teleop_len: tuple[int, int] = (56, 72)
    corrective_len: tuple[int, int] = (40, 56)
    junction_len: tuple[int, int] = (30, 42)
    teleop_amplitude: tuple[float, float] = (0.30, 0.38)
    corrective_amplitude: tuple[float, float] = (0.08, 0.16)
    frequency: tuple[float, float] = (1.0, 3.0)
    branch_count: tuple[int, int] = (2, 2)
    branch_offset: tuple[float, float] = (0.08, 0.14)
    p_mono_intro: float = 1.0
    mono_intro: tuple[float, float] = (0.38, 0.46)
    min_gap: int = 20
    edge_margin: int = 24
    envelope_ramp: float = 0.10
    horizon_total: int = 600
    tail_repeat: int = 100


@dataclass
class Environment:
    """Backbone control points plus typed uncertainty segments.

    ``horizon_total`` covers the test span plus a ``tail_repeat`` stretch
    where every trajectory repeats its final action; only
    [0, test_horizon) carries labels.
    """

    seed: int
    control_points: np.ndarray
    segments: tuple[UncertaintySegment, ...]
    horizon_total: int = 600
    tail_repeat: int = 100

    def __post_init__(self):
        self.control_points = np.asarray(self.control_points, dtype=float)
        if self.control_points.ndim != 2 or self.control_points.shape[1] != 2:
            raise ValueError("control_points must be (k, 2)")
        if self.control_points.shape[0] < 2:
            raise ValueError("need at least 2 control points")
        self.segments = tuple(sorted(self.segments, key=lambda s: s.start_t))
        horizon = self.test_horizon
        prev_end = 0
        for seg in self.segments:
            if seg.start_t < 0 or seg.end_t > horizon:
                raise ValueError(f"segment [{seg.start_t}, {seg.end_t}) outside [0, {horizon})")
            if seg.start_t < prev_end:
                raise ValueError(f"segments overlap at t={seg.start_t}")
            prev_end = seg.end_t
        self._backbone = None
        self._normals = None

    @property
    def test_horizon(self) -> int:
        return self.horizon_total - self.tail_repeat

    # -- backbone geometry ------------------------------------------------

    def _spline(self) -> tuple[np.ndarray, np.ndarray]:
        """Positions and unit normals of the backbone over [0, test_horizon)."""
        if self._backbone is None:
            pts = self.control_points
            k = pts.shape[0]
            # Catmull-Rom style tangents give a C1 chain of cubic Bezier spans
            # through the control points.
            tangents = np.empty_like(pts)
            tangents[0] = pts[1] - pts[0]
            tangents[-1] = pts[-1] - pts[-2]
            if k > 2:
                tangents[1:-1] = 0.5 * (pts[2:] - pts[:-2])

            u = np.linspace(0.0, 1.0, self.test_horizon)
            scaled = np.minimum(u * (k - 1), k - 1 - 1e-9)
            span = scaled.astype(int)
            s = (scaled - span)[:, None]

            b0 = pts[span]
            b1 = pts[span] + tangents[span] / 3.0
            b2 = pts[span + 1] - tangents[span + 1] / 3.0
            b3 = pts[span + 1]
            omt = 1.0 - s
            pos = omt**3 * b0 + 3 * omt**2 * s * b1 + 3 * omt * s**2 * b2 + s**3 * b3
            deriv = 3 * omt**2 * (b1 - b0) + 6 * omt * s * (b2 - b1) + 3 * s**2 * (b3 - b2)

            norm = np.linalg.norm(deriv, axis=1, keepdims=True)
            norm[norm < 1e-12] = 1.0
            tang = deriv / norm
            normals = np.stack([-tang[:, 1], tang[:, 0]], axis=1)
            self._backbone = pos
            self._normals = normals
        return self._backbone, self._normals

    def backbone(self) -> np.ndarray:
        """(test_horizon, 2) backbone positions."""
        return self._spline()[0]

    def normals(self) -> np.ndarray:
        """(test_horizon, 2) unit normals to the backbone."""
        return self._spline()[1]

    def labels(self) -> np.ndarray:
        """Per-step ground-truth labels over [0, test_horizon)."""
        out = np.full(self.test_horizon, _LABEL_CODE[Label.NONE], dtype=np.int8)
        for seg in self.segments:
            out[seg.start_t:seg.end_t] = _LABEL_CODE[seg.label]
        return out

    def segment_at(self, t: int) -> UncertaintySegment | None:
        for seg in self.segments:
            if seg.start_t <= t < seg.end_t:
                return seg
        return None

    # -- serialization -----------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "control_points": self.control_points.tolist(),
            "segments": [
                {
                    "kind": seg.kind.value,
                    "start_t": seg.start_t,
                    "end_t": seg.end_t,
                    "params": seg.params,
                }
                for seg in self.segments
            ],
            "horizon_total": self.horizon_total,
            "tail_repeat": self.tail_repeat,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def save(self, path) -> None:
        Path(path).write_text(self.to_json() + "\n", encoding="utf-8")

    @classmethod
    def from_dict(cls, data: dict) -> "Environment":
        return cls(
            seed=int(data["seed"]),
            control_points=np.asarray(data["control_points"], dtype=float),
            segments=tuple(
                UncertaintySegment(
                    kind=SegmentKind(seg["kind"]),
                    start_t=int(seg["start_t"]),
                    end_t=int(seg["end_t"]),
                    params=dict(seg.get("params", {})),
                )
                for seg in data["segments"]
            ),
            horizon_total=int(data["horizon_total"]),
            tail_repeat=int(data["tail_repeat"]),
        )


LABEL_CODES = (Label.NONE, Label.CORRECTIONS, Label.TELEOPERATION, Label.DISCRETE)
_LABEL_CODE = {label: i for i, label in enumerate(LABEL_CODES)}


def label_code(label: Label) -> int:
    return _LABEL_CODE[label]


def load_environment(path) -> Environment:
    return Environment.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def ground_truth_label(env: Environment, t: int) -> Label:
    """Ground-truth assistance label at step t, by segment membership."""
    if not 0 <= t < env.test_horizon:
        raise ValueError(f"t={t} outside [0, {env.test_horizon})")
    seg = env.segment_at(t)
    return seg.label if seg is not None else Label.NONE


def _place_segments(rng: np.random.Generator, lengths: list[int], span: int,
                    min_gap: int, edge_margin: int) -> list[int]:
    """Random non-overlapping start offsets for the given lengths."""
    k = len(lengths)
    slack = span - 2 * edge_margin - sum(lengths) - min_gap * (k - 1)
    if slack < 0:
        raise InfeasibleConfigError(
            f"cannot fit {k} segments totalling {sum(lengths)} steps into "
            f"{span} steps with gap {min_gap} and edge margin {edge_margin}"
        )
    # Split the slack into k+1 random gaps; multinomial keeps it integral.
    gaps = rng.multinomial(slack, np.full(k + 1, 1.0 / (k + 1)))
    starts = []
    t = edge_margin + int(gaps[0])
    for i, length in enumerate(lengths):
        starts.append(t)
        t += length + min_gap + int(gaps[i + 1])
    return starts


def generate_environment(seed: int, config: GenerationConfig | None = None) -> Environment:
    """Deterministically generate a random environment from a seed."""
    cfg = config or GenerationConfig()
    rng = np.random.default_rng(seed)

    n_pts = int(rng.integers(cfg.n_control_points[0], cfg.n_control_points[1] + 1))
    control_points = rng.uniform(0.0, 1.0, size=(n_pts, 2))

    plan: list[SegmentKind] = []
    for kind, count_range in (
        (SegmentKind.TELEOP_2D, cfg.n_teleop),
        (SegmentKind.CORRECTIVE_1D, cfg.n_corrective),
        (SegmentKind.DISCRETE_JUNCTION, cfg.n_junction),
    ):
        plan.extend([kind] * int(rng.integers(count_range[0], count_range[1] + 1)))
    order = rng.permutation(len(plan))
    plan = [plan[i] for i in order]

    length_range = {
        SegmentKind.TELEOP_2D: cfg.teleop_len,
        SegmentKind.CORRECTIVE_1D: cfg.corrective_len,
        SegmentKind.DISCRETE_JUNCTION: cfg.junction_len,
    }
    lengths = [int(rng.integers(length_range[k][0], length_range[k][1] + 1)) for k in plan]

    span = cfg.horizon_total - cfg.tail_repeat
    starts = _place_segments(rng, lengths, span, cfg.min_gap, cfg.edge_margin)

    segments = []
    for kind, start, length in zip(plan, starts, lengths):
        if kind is SegmentKind.TELEOP_2D:
            params = {
                "amplitude": float(rng.uniform(*cfg.teleop_amplitude)),
                "frequency": float(rng.uniform(*cfg.frequency)),
            }
            # A 2D wobble that develops out of a single-direction stretch:
            # over the first mono_intro of the segment only one dimension
            # varies, which is where 1D and 2D assistance genuinely blur.
            if rng.random() < cfg.p_mono_intro:
                params["mono_intro"] = float(rng.uniform(*cfg.mono_intro))
        elif kind is SegmentKind.CORRECTIVE_1D:
            params = {
                "amplitude": float(rng.uniform(*cfg.corrective_amplitude)),
                "frequency": float(rng.uniform(*cfg.frequency)),
            }
        else:
            params = {
                "branch_count": int(rng.integers(cfg.branch_count[0], cfg.branch_count[1] + 1)),
                "branch_offset": float(rng.uniform(*cfg.branch_offset)),
            }
        segments.append(UncertaintySegment(kind=kind, start_t=start, end_t=start + length, params=params))

    return Environment(
        seed=seed,
        control_points=control_points,
        segments=tuple(segments),
        horizon_total=cfg.horizon_total,
        tail_repeat=cfg.tail_repeat,
    )
