"""Ground-truth trajectory and rollout sampling.

Stands in for a learned stochastic policy: rollouts are drawn from the
same generative process that produced the training variability, so the
estimation pipeline sees exactly the action distributions the environment
defines. Actions are absolute 2D positions (differential sources must be
cumulatively summed before building a rollout tensor).

Rollout tensors are shaped (n_a, n_r, horizon): action dimension x sample
x forecast step.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .environment import Environment, SegmentKind, UncertaintySegment

__all__ = [
    "NOISE_SIGMA",
    "sample_trajectory",
    "sample_rollouts",
    "write_trajectory_csv",
]

# Baseline action noise everywhere, matching the beta = 1e6 human-noise scale.
NOISE_SIGMA = 1e-3

# Per-trajectory sinusoid amplitudes draw from [_AMP_LO * A, A]; the narrow
# band keeps cross-trajectory variance close to the segment's nominal level.
_AMP_LO = 0.7


def _envelope(u: np.ndarray, ramp: float = 0.25) -> np.ndarray:
    """Trapezoidal amplitude window over segment progress u in (0, 1)."""
    return np.clip(np.minimum(u / ramp, (1.0 - u) / ramp), 0.0, 1.0)


def _branch_offsets(count: int) -> np.ndarray:
    """Signed lateral multipliers for junction branches, symmetric about 0."""
    return np.linspace(-1.0, 1.0, count)


def _apply_segment(pos: np.ndarray, seg: UncertaintySegment, steps: np.ndarray,
                   normals: np.ndarray, rng: np.random.Generator,
                   forced_branch: int | np.ndarray | None) -> None:
    """Add one segment's per-trajectory offsets to pos (n, len(steps), 2) in place."""
    n = pos.shape[0]
    mask = (steps >= seg.start_t) & (steps < seg.end_t)
    if not mask.any():
        return
    tt = steps[mask]
    u = (tt - seg.start_t + 0.5) / seg.length
    w = _envelope(u)

    if seg.kind is SegmentKind.TELEOP_2D:
        amp = seg.params["amplitude"]
        freq = seg.params["frequency"]
        a = rng.uniform(_AMP_LO * amp, amp, size=(n, 1, 2))
        phi = rng.uniform(0.0, 2.0 * np.pi, size=(n, 1, 2))
        phase = 2.0 * np.pi * freq * u[None, :, None]
        offsets = w[None, :, None] * a * np.sin(phase + phi)
        mono = seg.params.get("mono_intro")
        if mono:
            # Second dimension's variability ramps in after the 1D stretch.
            offsets[:, :, 1] *= np.clip((u - mono) / 0.06, 0.0, 1.0)[None, :]
        pos[:, mask, :] += offsets
    elif seg.kind is SegmentKind.CORRECTIVE_1D:
        amp = seg.params["amplitude"]
        freq = seg.params["frequency"]
        a = rng.uniform(_AMP_LO * amp, amp, size=(n, 1))
        phi = rng.uniform(0.0, 2.0 * np.pi, size=(n, 1))
        scalar = w[None, :] * a * np.sin(2.0 * np.pi * freq * u[None, :] + phi)
        pos[:, mask, :] += scalar[:, :, None] * normals[tt][None, :, :]
    else:
        count = int(seg.params["branch_count"])
        offset = seg.params["branch_offset"]
        if forced_branch is None:
            branch = rng.integers(0, count, size=n)
        else:
            branch = np.broadcast_to(np.asarray(forced_branch), (n,))
        c = _branch_offsets(count)[branch]
        lateral = c[:, None] * (offset * w)[None, :]
        pos[:, mask, :] += lateral[:, :, None] * normals[tt][None, :, :]


def _batch_positions(env: Environment, rng: np.random.Generator, n: int,
                     steps: np.ndarray, noise_sigma: float,
                     forced_branches: dict[int, int | np.ndarray] | None = None) -> np.ndarray:
    """(n, len(steps), 2) trajectory positions at the given absolute steps (< test_horizon)."""
    backbone = env.backbone()
    normals = env.normals()
    pos = np.broadcast_to(backbone[steps], (n, steps.size, 2)).copy()
    for si, seg in enumerate(env.segments):
        forced = None if forced_branches is None else forced_branches.get(si)
        _apply_segment(pos, seg, steps, normals, rng, forced)
    if noise_sigma > 0:
        pos += rng.normal(0.0, noise_sigma, size=pos.shape)
    return pos


def sample_trajectory(env: Environment, seed, noise_sigma: float = NOISE_SIGMA) -> np.ndarray:
    """One full trajectory, shape (horizon_total, 2).

    Pure function of (env, seed); seed may be an int or a sequence of
    ints. Follows the backbone, adds each segment's variability from
    per-trajectory random draws, commits one uniformly random branch at
    junctions, adds baseline Gaussian noise everywhere, then repeats the
    final action over the tail.
    """
    key = [seed] if np.ndim(seed) == 0 else list(seed)
    rng = np.random.default_rng([env.seed] + key)
    steps = np.arange(env.test_horizon)
    pos = _batch_positions(env, rng, 1, steps, noise_sigma)[0]
    tail = np.broadcast_to(pos[-1], (env.tail_repeat, 2))
    return np.concatenate([pos, tail], axis=0)


def _nearest_branch(env: Environment, seg: UncertaintySegment, t: int, position: np.ndarray) -> int:
    """Branch whose offset path at step t is closest to the current position."""
    u = (t - seg.start_t + 0.5) / seg.length
    w = float(_envelope(np.asarray([u]))[0])
    center = env.backbone()[t]
    normal = env.normals()[t]
    candidates = center[None, :] + (
        _branch_offsets(int(seg.params["branch_count"]))[:, None]
        * seg.params["branch_offset"] * w * normal[None, :]
    )
    d = np.linalg.norm(candidates - np.asarray(position)[None, :], axis=1)
    return int(np.argmin(d))


def sample_rollouts(env: Environment, position, t: int, n_r: int = 50,
                    horizon: int = 64, seed=None, rng: np.random.Generator | None = None,
                    p_collapse: float = 0.0, noise_sigma: float = NOISE_SIGMA) -> np.ndarray:
    """Forecast n_r rollouts from step t, shape (2, n_r, horizon).

    Each rollout is a fresh draw from the generative process over the
    forecast window [t+1, t+horizon]. Junction handling: if t is already
    inside a junction, every rollout follows the branch nearest to the
    current position (variability has collapsed); otherwise each rollout
    commits its own uniform branch, except that with probability
    ``p_collapse`` all rollouts commit to one shared branch, reproducing
    mode collapse. Windows past the end of the trajectory repeat the final
    action.
    """
    if not 0 <= t < env.test_horizon:
        raise ValueError(f"t={t} outside [0, {env.test_horizon})")
    if rng is None:
        rng = np.random.default_rng(seed)
    position = np.asarray(position, dtype=float)

    last = env.test_horizon - 1
    first = min(t + 1, last)
    distinct = np.arange(first, min(t + horizon, last) + 1)
    window_lo, window_hi = t + 1, t + horizon

    forced: dict[int, int | np.ndarray] = {}
    for si, seg in enumerate(env.segments):
        if seg.kind is not SegmentKind.DISCRETE_JUNCTION:
            continue
        if not (seg.start_t < window_hi + 1 and seg.end_t > window_lo):
            continue
        if seg.start_t <= t < seg.end_t:
            forced[si] = _nearest_branch(env, seg, t, position)
        elif p_collapse > 0 and rng.random() < p_collapse:
            forced[si] = int(rng.integers(0, int(seg.params["branch_count"])))

    pos = _batch_positions(env, rng, n_r, distinct, noise_sigma, forced)
    repeats = horizon - distinct.size
    if repeats > 0:
        tail = np.broadcast_to(pos[:, -1:, :], (n_r, repeats, 2))
        pos = np.concatenate([pos, tail], axis=1)
    return np.ascontiguousarray(pos.transpose(2, 0, 1))


def write_trajectory_csv(trajectory: np.ndarray, path) -> None:
    """Export a (T, 2) trajectory as CSV with columns t, x, y."""
    trajectory = np.asarray(trajectory)
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "x", "y"])
        for i, (x, y) in enumerate(trajectory):
            writer.writerow([i, repr(float(x)), repr(float(y))])
