"""Acceptance gate: every criterion at its stated tolerance.

The desk-scale benchmark run (8 environments x 100 test trajectories)
backs several criteria and is computed once as a module fixture; expect
this module to dominate the suite's runtime.
"""

import json
import math
import time

import mpmath
import numpy as np
import pytest
from starlette.testclient import TestClient

from assistarb.arbiter import (
    DEFAULT_LAMBDAS,
    ArbiterConfig,
    mechanism_value,
    validate_config,
)
from assistarb.entropy import gaussian_entropy, sample_entropy_1d, uniform_entropy_upper
from assistarb.environment import Label, generate_environment
from assistarb.estimation import arbitrate, default_config_for
from assistarb.evaluation import (
    GateStats,
    MATRIX_ROWS,
    SamplerSettings,
    combine_results,
    default_input_weights,
    evaluate_environment,
    input_metric,
)
from assistarb.mechanisms import (
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
from assistarb.rollouts import sample_rollouts
from assistarb.server import PlaygroundService, create_app
from assistarb.session import Session, SessionConfig, replay_log
from assistarb.session_log import SessionLog

from conftest import record_criterion

BETA = 1e6
GAUSS_H = 0.5 * math.log(2 * math.pi * math.e)

EVAL_ENV_SEEDS = range(200, 208)
N_TEST = 100
EVAL_SEED = 11
GAMMA = 0.3


@pytest.fixture(scope="module")
def suite():
    """The desk-scale evaluation backing the benchmark criteria."""
    results = []
    for env_seed in EVAL_ENV_SEEDS:
        env = generate_environment(env_seed)
        config = default_config_for(env)
        results.append(evaluate_environment(
            env, n_test=N_TEST, config=config, baseline_gamma=GAMMA,
            seed=EVAL_SEED, workers=2,
        ))
    return results


def test_entropy_estimator_accuracy_and_speed():
    worst = 0.0
    for sigma in (1.0, 0.1, 0.001):
        estimates = [
            sample_entropy_1d(np.random.default_rng(seed).normal(0.0, sigma, 10_000))
            for seed in range(20)
        ]
        err = abs(float(np.mean(estimates)) - (GAUSS_H + math.log(sigma)))
        worst = max(worst, err)
        assert err < 0.05, f"sigma={sigma}: err={err:.4f}"

    x = np.random.default_rng(0).standard_normal(10_000)
    times = []
    for _ in range(50):
        tic = time.perf_counter()
        sample_entropy_1d(x)
        times.append(time.perf_counter() - tic)
    per_call_ms = float(np.median(times)) * 1e3
    ok = worst < 0.05 and per_call_ms < 1.0
    record_criterion("entropy-estimator", ok,
                     f"max |err|={worst:.4f} nats (<0.05), {per_call_ms:.3f} ms/call (<1)")
    assert per_call_ms < 1.0


def test_closed_forms_match_high_precision():
    mpmath.mp.dps = 50
    worst = 0.0
    for n_a, beta in ((1, 1.0), (2, 1e6), (3, 0.25), (5, 1e6), (2, 1.0)):
        ours = gaussian_entropy(n_a, beta)
        ref = -mpmath.mpf(n_a) / 2 * mpmath.log(beta) + mpmath.mpf(n_a) / 2 * (1 + mpmath.log(2 * mpmath.pi))
        worst = max(worst, abs(ours - float(ref)) / abs(float(ref)))

    rng = np.random.default_rng(1)
    boxes = [[(0, 1), (0, 1)], [(0, 2), (0, 5)], [(-1, 1)]]
    for _ in range(20):
        n_a = int(rng.integers(1, 6))
        lo = rng.uniform(-5, 4, n_a)
        boxes.append(list(zip(lo, lo + rng.uniform(1e-3, 10, n_a))))
    for box in boxes:
        ours = uniform_entropy_upper(box)
        ref = mpmath.log(mpmath.fprod([mpmath.mpf(hi) - mpmath.mpf(lo) for lo, hi in box]))
        denom = max(abs(float(ref)), 1.0)
        worst = max(worst, abs(ours - float(ref)) / denom)

    record_criterion("closed-forms", worst < 1e-12, f"max rel err={worst:.2e} (<1e-12)")
    assert worst < 1e-12


def test_value_formula_matches_brute_force():
    rng = np.random.default_rng(2)
    worst = 0.0
    for i in range(1000):
        horizon = int(rng.integers(1, 33))
        n_a = int(rng.integers(1, 5))
        lam = float(rng.uniform(0.05, 1.0))
        beta = 10 ** rng.uniform(-2, 7)
        lo = rng.uniform(-3, 3, n_a)
        ranges = np.stack([lo, lo + rng.uniform(0.5, 6, n_a)], axis=1)
        config = ArbiterConfig(
            mechanisms=(NO_ASSIST,), lambdas={NO_ASSIST: lam}, beta=beta,
            ranges=ranges, horizon=horizon,
        )
        if not config.h_max > config.h_min:
            continue
        h = rng.uniform(config.h_min - 4, config.h_max + 4, horizon)
        est = MechanismEstimate(NO_ASSIST, h, 0.0)
        got = mechanism_value(est, config).value

        # Plain scalar reimplementation, no shared code path.
        total = math.fsum(min(max(v, config.h_min), config.h_max) for v in h)
        expected = lam * (horizon * config.h_max - total) / (horizon * (config.h_max - config.h_min))
        err = abs(got - expected) / max(abs(expected), 1e-9)
        worst = max(worst, err)
    record_criterion("value-oracle", worst < 1e-12, f"max rel err={worst:.2e} over 1000 draws (<1e-12)")
    assert worst < 1e-12


def test_benchmark_reproduction(suite):
    pooled = combine_results(suite)["pooled"]
    diag = pooled["diagonal_filtered"]
    detection = pooled["discrete_detection"]["rate"]
    raw = np.array(pooled["confusion_raw"]["normalized"])
    off = raw.copy()
    for i in range(len(MATRIX_ROWS)):
        off[i, i] = 0.0
    largest = np.unravel_index(np.argmax(off), off.shape)
    pattern_ok = largest in ((2, 1), (1, 2))  # teleoperation <-> corrections

    ok = (min(diag.values()) >= 0.80) and detection >= 0.95 and pattern_ok
    record_criterion(
        "benchmark-reproduction", ok,
        f"filtered diag none={diag['none']:.3f} corr={diag['corrections']:.3f} "
        f"tele={diag['teleoperation']:.3f} (>=0.80), detection={detection:.3f} (>=0.95), "
        f"largest off-diagonal cell at {largest} (tele<->corr)")
    assert diag["none"] >= 0.80
    assert diag["corrections"] >= 0.80
    assert diag["teleoperation"] >= 0.80
    assert detection >= 0.95
    assert pattern_ok


def test_mode_collapse_kills_detection():
    hits = total = 0
    for env_seed in EVAL_ENV_SEEDS:
        env = generate_environment(env_seed)
        config = default_config_for(env)
        res = evaluate_environment(
            env, n_test=N_TEST, config=config,
            sampler=SamplerSettings(p_collapse=1.0), seed=EVAL_SEED,
            workers=2, detection_only=True,
        )
        hits += res.detection_hits
        total += res.detection_total
    rate = hits / total
    record_criterion("mode-collapse", rate < 0.1,
                     f"forced-collapse detection rate={rate:.3f} over {total} junctions (<0.1)")
    assert rate < 0.1


def test_boundary_margin_effect(suite):
    errors = near = 0
    for res in suite:
        lab = np.broadcast_to(res.labels[None, :], res.decisions.shape)
        rows = lab < 3
        err = rows & (res.decisions != lab)
        errors += int(err.sum())
        near += int((err & np.broadcast_to(res.margin_mask[None, :], err.shape)).sum())
    frac = near / errors
    record_criterion("boundary-margin", frac >= 0.5,
                     f"{frac:.3f} of raw errors within the transition margin (>=0.5)")
    assert frac >= 0.5


def test_penalization_ordering_enforced():
    mechs = (NO_ASSIST, discrete(2), corrections(1), TELEOP)
    base = ArbiterConfig(
        mechanisms=mechs, lambdas=dict(DEFAULT_LAMBDAS), beta=BETA,
        ranges=np.array([[-1.0, 1.0]] * 5), horizon=12,
    )
    assert validate_config(base).ok

    pairs = [(a, b) for a in mechs for b in mechs if a != b]
    assert len(pairs) == 12
    caught = 0
    for a, b in pairs:
        hi, lo = (a, b) if base.input_cost(a) > base.input_cost(b) else (b, a)
        lambdas = dict(DEFAULT_LAMBDAS)
        lambdas[hi] = lambdas[lo]
        report = validate_config(ArbiterConfig(
            mechanisms=mechs, lambdas=lambdas, beta=BETA,
            ranges=np.array([[-1.0, 1.0]] * 5), horizon=12,
        ))
        if (hi, lo) in report.violations:
            caught += 1
    record_criterion("penalization-ordering", caught == 12,
                     f"published set accepted; {caught}/12 pairwise mutations caught")
    assert caught == 12


def test_entropy_ordering_across_mechanisms():
    # Spreads stay above the estimator's noise floor; at floor scale the
    # per-step spacing noise alone exceeds the stated tolerance.
    rng = np.random.default_rng(777)
    worst_corr = worst_disc = -np.inf
    for i in range(500):
        scale = 10 ** rng.uniform(-2, 0)
        tensor = rng.normal(0.0, scale, size=(2, 50, 16))
        style = rng.integers(3)
        if style == 1:
            tensor[:, 25:, :] += rng.uniform(0.1, 1.0)
        elif style == 2:
            tensor[1] *= 1e-2
        na = estimate_no_assist(tensor, BETA).per_step_entropy
        disc = estimate_discrete(tensor, 2, BETA, seed=i).per_step_entropy
        corr = estimate_corrections(tensor, 1, BETA, seed=i).per_step_entropy
        tele = estimate_teleop(2, 16, BETA).per_step_entropy
        assert np.all(tele <= corr + 1e-12)
        worst_corr = max(worst_corr, float((corr - na).max()))
        worst_disc = max(worst_disc, float((disc - na).max()))
    ok = worst_corr <= 0.1 and worst_disc <= 0.1
    record_criterion("entropy-ordering", ok,
                     f"500 tensors: max corr-na={worst_corr:.3f}, "
                     f"max disc-na={worst_disc:.3f} (<=0.1), teleop always lowest")
    assert worst_corr <= 0.1
    assert worst_disc <= 0.1


def test_realtime_budget():
    env = generate_environment(200)
    config = default_config_for(env)
    tensor = sample_rollouts(env, env.backbone()[100], 100, n_r=50, horizon=64, seed=0)
    window = tensor[:, :, :16]
    times = []
    for i in range(120):
        tic = time.perf_counter()
        arbitrate(window, config, seed_key=[0, i])
        times.append(time.perf_counter() - tic)
    median_ms = float(np.median(times)) * 1e3
    record_criterion("realtime-budget", median_ms <= 10.0,
                     f"estimation+arbitration {median_ms:.2f} ms/cycle (<=10)")
    assert median_ms <= 10.0


def test_uateleop_baseline(suite):
    gates = [r.gate for r in suite]
    human = sum(g.human_filtered for g in gates)
    total = sum(g.total_filtered for g in gates)
    pooled = GateStats(human, total, human, total)
    human_tele = pooled.human_rate(Label.TELEOPERATION, filtered=True)
    robot_none = pooled.robot_rate(Label.NONE, filtered=True)
    ok = human_tele >= 0.90 and robot_none >= 0.90
    record_criterion("uateleop-baseline", ok,
                     f"gamma={GAMMA}: human on teleop={human_tele:.3f}, "
                     f"robot on certainty={robot_none:.3f} (both >=0.90, margin-filtered)")
    assert human_tele >= 0.90
    assert robot_none >= 0.90


def test_deterministic_replay(small_env, small_config):
    from assistarb.session import DiscreteChoice, TeleopAction

    config = SessionConfig(arbiter=small_config, seed=77)
    session = Session(small_env, config)
    guard = 0
    while not session.done and guard < 3000:
        guard += 1
        inp = None
        if session.mode is MechanismKind.DISCRETE:
            inp = DiscreteChoice(1)
        elif session.mode is MechanismKind.TELEOP:
            target = small_env.backbone()[min(session.t + 1, small_env.test_horizon - 1)]
            target = np.clip(target, small_config.ranges[:, 0] + 1e-9,
                             small_config.ranges[:, 1] - 1e-9)
            inp = TeleopAction(tuple(target))
        session.step(inp)
    assert session.done

    twin = replay_log(small_env, config, session.log)
    a = np.stack(session.position_history)
    b = np.stack(twin.position_history)
    identical = a.shape == b.shape and np.array_equal(a, b)
    record_criterion("deterministic-replay", identical,
                     f"{a.shape[0]} positions reproduced bit-for-bit")
    assert identical


def test_playground_end_to_end(small_env, small_config, tmp_path):
    """Secondary: scripted client over the wire protocol, exact metric."""
    config = SessionConfig(arbiter=small_config, seed=9, control_rate_hz=0.0)
    service = PlaygroundService(small_env, config, log_dir=tmp_path)
    client = TestClient(create_app(service))

    latencies = []
    with client.websocket_connect("/ws") as ws:
        msg = json.loads(ws.receive_text())
        done = msg.get("done", False)
        guard = 0
        while not done and guard < 4000:
            guard += 1
            prompt = msg.get("prompt")
            if prompt and prompt["kind"] == "discrete":
                out = {"kind": "discrete", "payload": {"index": 0}}
            elif prompt and prompt["kind"] == "teleop":
                t = min(msg["t"] + 1, small_env.test_horizon - 1)
                tgt = np.clip(small_env.backbone()[t], small_config.ranges[:, 0] + 1e-9,
                              small_config.ranges[:, 1] - 1e-9)
                out = {"kind": "teleop", "payload": {"target": [float(tgt[0]), float(tgt[1])]}}
            elif prompt and prompt["kind"] == "correction":
                out = {"kind": "correction", "payload": {"deltas": [0.01]}}
            else:
                out = None
            tic = time.perf_counter()
            ws.send_text(json.dumps(out) if out else "null")
            msg = json.loads(ws.receive_text())
            latencies.append(time.perf_counter() - tic)
            assert "error" not in msg, msg
            done = msg.get("done", False)
    assert done

    log = SessionLog.read(service.log_path)
    totals_line = [json.loads(line) for line in service.log_path.read_text().splitlines()][-1]
    # Hand-computed arithmetic: w_corr * corrections cycles + w_tele *
    # teleop cycles + one per discrete decision.
    cycles = {}
    choices = 0
    for record in log.records:
        cycles[record.mode] = cycles.get(record.mode, 0) + 1
        if record.discrete_choice is not None:
            choices += 1
    expected = 1.0 * cycles.get("corrections", 0) + 2.0 * cycles.get("teleop", 0) + choices
    metric = input_metric(log, default_input_weights(small_config))
    latency_ms = float(np.median(latencies)) * 1e3
    ok = metric == expected == totals_line["totals"]["input_metric"] and latency_ms < 50
    record_criterion("playground-end-to-end", ok,
                     f"metric={metric} == hand-computed {expected}, "
                     f"round-trip median {latency_ms:.1f} ms (<50)")
    assert metric == expected
    assert totals_line["totals"]["input_metric"] == expected
    assert latency_ms < 50
