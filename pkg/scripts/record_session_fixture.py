"""Record a scripted session's frames as a fixture for the browser client
tests. Regenerate with:  python scripts/record_session_fixture.py
"""

import json
from pathlib import Path

import numpy as np

from assistarb.environment import GenerationConfig, generate_environment
from assistarb.estimation import default_config_for
from assistarb.mechanisms import MechanismKind
from assistarb.session import DiscreteChoice, Session, SessionConfig, TeleopAction

GEN = GenerationConfig(
    horizon_total=200, tail_repeat=40,
    n_teleop=(1, 1), n_corrective=(1, 1), n_junction=(1, 1),
    teleop_len=(28, 32), corrective_len=(22, 26), junction_len=(20, 24),
    min_gap=10, edge_margin=12,
)


def main() -> None:
    env = generate_environment(3, GEN)
    config = default_config_for(env, n_train=50)
    session = Session(env, SessionConfig(arbiter=config, seed=5))
    frames = [session.snapshot().to_payload()]
    while not session.done:
        inp = None
        if session.mode is MechanismKind.DISCRETE:
            inp = DiscreteChoice(0)
        elif session.mode is MechanismKind.TELEOP:
            target = env.backbone()[min(session.t + 1, env.test_horizon - 1)]
            target = np.clip(target, config.ranges[:, 0] + 1e-9, config.ranges[:, 1] - 1e-9)
            inp = TeleopAction(tuple(target))
        frame = session.step(inp)
        payload = frame.to_payload()
        payload["rollouts"] = (payload["rollouts"] or [])[:3]  # keep the fixture small
        frames.append(payload)

    out = Path(__file__).resolve().parents[1] / "frontend" / "tests" / "fixtures"
    out.mkdir(parents=True, exist_ok=True)
    path = out / "session-frames.json"
    path.write_text(json.dumps(frames))
    modes = {f["mode"] for f in frames}
    print(f"wrote {path} ({len(frames)} frames, modes: {sorted(modes)})")


if __name__ == "__main__":
    main()
