import csv

import numpy as np
import pytest

from assistarb.environment import SegmentKind
from assistarb.rollouts import sample_rollouts, sample_trajectory, write_trajectory_csv


def _segment(env, kind):
    return next(s for s in env.segments if s.kind is kind)


def _clear_window(env, horizon=64):
    """A step whose whole forecast window stays outside every segment."""
    for t in range(env.test_horizon - horizon):
        window = range(t + 1, t + 1 + horizon)
        if all(env.segment_at(s) is None for s in window):
            return t
    raise AssertionError("environment has no clear window")


def test_trajectory_shape_and_tail(full_env):
    traj = sample_trajectory(full_env, 1)
    assert traj.shape == (600, 2)
    assert np.array_equal(traj[500:], np.broadcast_to(traj[499], (100, 2)))


def test_trajectory_deterministic(full_env):
    a = sample_trajectory(full_env, 17)
    b = sample_trajectory(full_env, 17)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, sample_trajectory(full_env, 18))


def test_quiet_outside_segments(full_env):
    trajs = np.stack([sample_trajectory(full_env, seed) for seed in range(100)])
    labels = full_env.labels()
    quiet = labels == 0
    stds = trajs[:, : full_env.test_horizon][:, quiet, :].std(axis=0, ddof=1)
    # sigma = 1e-3 noise; 1.35e-3 is past the 99.99th pct of the sample std.
    assert stds.max() < 1.35e-3


def test_junction_branch_frequencies(full_env):
    junc = _segment(full_env, SegmentKind.DISCRETE_JUNCTION)
    mid = (junc.start_t + junc.end_t) // 2
    center = full_env.backbone()[mid]
    normal = full_env.normals()[mid]
    sides = []
    for seed in range(1000):
        pos = sample_trajectory(full_env, seed)[mid]
        sides.append((pos - center) @ normal > 0)
    freq = np.mean(sides)
    assert 0.45 <= freq <= 0.55


def test_corrective_spread_is_rank_one(full_env):
    seg = _segment(full_env, SegmentKind.CORRECTIVE_1D)
    mid = (seg.start_t + seg.end_t) // 2
    pts = np.stack([sample_trajectory(full_env, seed)[mid] for seed in range(200)])
    eigs = np.sort(np.linalg.eigvalsh(np.cov(pts.T)))[::-1]
    assert eigs[1] < 0.05 * eigs[0]


def test_rollout_marginals_match_trajectories(full_env):
    t = 150
    n = 500
    horizon = 64
    start = full_env.backbone()[t]
    roll = sample_rollouts(full_env, start, t, n_r=n, horizon=horizon, seed=0)
    trajs = np.stack([sample_trajectory(full_env, [7000, i])[t + 1: t + 1 + horizon]
                      for i in range(n)])  # (n, H, 2)
    roll_mean = roll.mean(axis=1)  # (2, H)
    traj_mean = trajs.mean(axis=0).T  # (2, H)
    se = np.sqrt(roll.var(axis=1, ddof=1) / n + trajs.var(axis=0, ddof=1).T / n)
    assert np.all(np.abs(roll_mean - traj_mean) <= 3 * np.maximum(se, 1e-12) + 1e-9)


def test_rollouts_before_junction_cover_both_branches(full_env):
    junc = _segment(full_env, SegmentKind.DISCRETE_JUNCTION)
    t = junc.start_t - 3
    probe = junc.start_t + junc.length // 2
    roll = sample_rollouts(full_env, full_env.backbone()[t], t, n_r=50, horizon=64, seed=4)
    k = probe - (t + 1)
    center = full_env.backbone()[probe]
    normal = full_env.normals()[probe]
    frac = np.mean((roll[:, :, k].T - center) @ normal > 0)
    assert 0.3 <= frac <= 0.7


def test_forced_collapse_single_branch(full_env):
    junc = _segment(full_env, SegmentKind.DISCRETE_JUNCTION)
    t = junc.start_t - 3
    probe = junc.start_t + junc.length // 2
    center = full_env.backbone()[probe]
    normal = full_env.normals()[probe]
    for seed in range(5):
        roll = sample_rollouts(full_env, full_env.backbone()[t], t, n_r=50,
                               horizon=64, seed=seed, p_collapse=1.0)
        k = probe - (t + 1)
        sides = (roll[:, :, k].T - center) @ normal > 0
        assert sides.all() or not sides.any()


def test_inside_junction_is_conditioned_on_position(full_env):
    junc = _segment(full_env, SegmentKind.DISCRETE_JUNCTION)
    t = junc.start_t + junc.length // 2
    probe = t + 2
    center = full_env.backbone()[probe]
    normal = full_env.normals()[probe]
    offset = junc.params["branch_offset"]
    for sign in (+1.0, -1.0):
        position = full_env.backbone()[t] + sign * offset * full_env.normals()[t]
        roll = sample_rollouts(full_env, position, t, n_r=30, horizon=16, seed=2)
        sides = (roll[:, :, probe - (t + 1)].T - center) @ normal > 0
        assert sides.all() if sign > 0 else not sides.any()


def test_certainty_window_spread_at_noise_floor(full_env):
    # Default gaps between segments are ~20 steps; probe a window that fits.
    t = _clear_window(full_env, horizon=18)
    roll = sample_rollouts(full_env, full_env.backbone()[t], t, n_r=200, horizon=18, seed=0)
    stds = roll.std(axis=1, ddof=1)
    assert stds.max() < 1.35e-3


def test_horizon_truncation_repeats_final_action(full_env):
    t = full_env.test_horizon - 5
    roll = sample_rollouts(full_env, full_env.backbone()[t], t, n_r=8, horizon=32, seed=1)
    assert roll.shape == (2, 8, 32)
    tail = roll[:, :, 4:]
    assert np.array_equal(tail, np.broadcast_to(roll[:, :, 4:5], tail.shape))


def test_rollout_determinism(full_env):
    a = sample_rollouts(full_env, full_env.backbone()[40], 40, seed=9)
    b = sample_rollouts(full_env, full_env.backbone()[40], 40, seed=9)
    assert np.array_equal(a, b)


def test_rejects_out_of_range_step(full_env):
    with pytest.raises(ValueError):
        sample_rollouts(full_env, full_env.backbone()[0], full_env.test_horizon, seed=0)


def test_trajectory_csv_roundtrip(tmp_path, full_env):
    traj = sample_trajectory(full_env, 3)
    path = tmp_path / "traj.csv"
    write_trajectory_csv(traj, path)
    with path.open() as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["t", "x", "y"]
    assert len(rows) == 601
    back = np.array([[float(x), float(y)] for _, x, y in rows[1:]])
    assert np.array_equal(back, traj)
