"""Post-intervention entropy estimates per assistance mechanism.

Each estimator answers: if the human helped this way, how much action
uncertainty would remain at each forecast step? The four mechanisms are
no assistance (policy uncertainty as-is), a discrete choice among n_d
clustered behaviors, corrective control of the top n_c principal action
directions, and full teleoperation (a noisily optimal human everywhere).
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field

import numpy as np

from .entropy import gaussian_entropy, sample_entropy_rows

__all__ = [
    "MechanismKind",
    "MechanismId",
    "MechanismEstimate",
    "NO_ASSIST",
    "TELEOP",
    "discrete",
    "corrections",
    "estimate_no_assist",
    "estimate_discrete",
    "estimate_teleop",
    "estimate_corrections",
]


class MechanismKind(str, enum.Enum):
    NO_ASSIST = "no_assist"
    DISCRETE = "discrete"
    CORRECTIONS = "corrections"
    TELEOP = "teleop"


# Fixed order used for deterministic tie-breaking.
KIND_ORDER = {
    MechanismKind.NO_ASSIST: 0,
    MechanismKind.DISCRETE: 1,
    MechanismKind.CORRECTIONS: 2,
    MechanismKind.TELEOP: 3,
}

_LABEL_RE = re.compile(r"^(no_assist|teleop|discrete|corrections)(?:\((\d+)\))?$")


@dataclass(frozen=True)
class MechanismId:
    """A mechanism kind plus its arity: n_d choices or n_c controlled dims."""

    kind: MechanismKind
    arity: int | None = None

    def __post_init__(self):
        if self.kind is MechanismKind.DISCRETE:
            if self.arity is None or self.arity < 2:
                raise ValueError("discrete mechanism needs arity n_d >= 2")
        elif self.kind is MechanismKind.CORRECTIONS:
            if self.arity is None or self.arity < 1:
                raise ValueError("corrections mechanism needs arity n_c >= 1")
        elif self.arity is not None:
            raise ValueError(f"{self.kind.value} takes no arity")

    def input_cost(self, n_a: int, horizon: int) -> float:
        """Total human input k over the estimate horizon."""
        if self.kind is MechanismKind.NO_ASSIST:
            return 0.0
        if self.kind is MechanismKind.DISCRETE:
            return float(self.arity)
        if self.kind is MechanismKind.CORRECTIONS:
            return float(self.arity * horizon)
        return float(n_a * horizon)

    def label(self) -> str:
        if self.arity is None:
            return self.kind.value
        return f"{self.kind.value}({self.arity})"

    @classmethod
    def parse(cls, label: str) -> "MechanismId":
        m = _LABEL_RE.match(label.strip())
        if not m:
            raise ValueError(f"unrecognized mechanism label {label!r}")
        kind = MechanismKind(m.group(1))
        arity = int(m.group(2)) if m.group(2) else None
        return cls(kind, arity)


NO_ASSIST = MechanismId(MechanismKind.NO_ASSIST)
TELEOP = MechanismId(MechanismKind.TELEOP)


def discrete(n_d: int) -> MechanismId:
    return MechanismId(MechanismKind.DISCRETE, n_d)


def corrections(n_c: int) -> MechanismId:
    return MechanismId(MechanismKind.CORRECTIONS, n_c)


@dataclass
class MechanismEstimate:
    """Per-step post-intervention entropies plus mechanism metadata.

    ``cluster_assignments``/``cluster_means`` are set for discrete
    estimates, ``principal_directions`` (horizon, n_c, n_a) for
    corrections. ``floored_clusters`` flags clusters too small for the
    spacing estimator (optimistically floored); ``degenerate_steps`` flags
    steps where a zero-variance slice forced a fallback direction basis.
    """

    mechanism: MechanismId
    per_step_entropy: np.ndarray
    human_input_k: float
    cluster_assignments: np.ndarray | None = None
    cluster_means: np.ndarray | None = None
    floored_clusters: tuple[int, ...] = ()
    principal_directions: np.ndarray | None = None
    degenerate_steps: tuple[int, ...] = field(default_factory=tuple)

    @property
    def horizon(self) -> int:
        return int(self.per_step_entropy.shape[0])


def _check_tensor(A: np.ndarray) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim != 3:
        raise ValueError(f"rollout tensor must be (n_a, n_r, T), got shape {A.shape}")
    if not np.isfinite(A).all():
        raise ValueError("rollout tensor contains non-finite entries")
    return A


def _per_step_entropy(A: np.ndarray, beta: float, m: int | None) -> np.ndarray:
    """Floored per-dimension entropy sum for each step of an (n_a, n, T) tensor."""
    n_a, n, T = A.shape
    rows = A.transpose(0, 2, 1).reshape(n_a * T, n)
    per_dim = sample_entropy_rows(rows, m=m, floor=gaussian_entropy(1, beta))
    return per_dim.reshape(n_a, T).sum(axis=0)


def estimate_no_assist(A, beta: float, m: int | None = None) -> MechanismEstimate:
    """Remaining uncertainty without help: sample entropy of the rollouts."""
    A = _check_tensor(A)
    return MechanismEstimate(
        mechanism=NO_ASSIST,
        per_step_entropy=_per_step_entropy(A, beta, m),
        human_input_k=0.0,
    )


def _kmeans(X: np.ndarray, k: int, restarts: int, seed, max_iter: int = 100) -> tuple[np.ndarray, np.ndarray]:
    """Restarted k-means with seeded farthest-point init; best by inertia.

    Restarts differ only in the random first point of the farthest-point
    init, so duplicate init sets are deduplicated; the surviving restarts
    run Lloyd iterations in one vectorized batch until every restart's
    assignments are stable (or max_iter).
    """
    n = X.shape[0]
    rng = np.random.default_rng(seed)
    firsts = rng.integers(0, n, size=restarts)

    pair_d2 = ((X[:, None, :] - X[None, :, :]) ** 2).sum(axis=2)
    seen = set()
    inits = []
    for f in firsts:
        idx = [int(f)]
        d2 = pair_d2[f]
        for _ in range(k - 1):
            nxt = int(np.argmax(d2))
            idx.append(nxt)
            d2 = np.minimum(d2, pair_d2[nxt])
        key = tuple(sorted(idx))
        if key not in seen:
            seen.add(key)
            inits.append(idx)

    centers = X[np.asarray(inits)]  # (R, k, F)
    n_restarts = centers.shape[0]
    x_sq = (X**2).sum(axis=1)
    restart_rows = np.arange(n_restarts)
    prev_assign = None
    for _ in range(max_iter):
        d2 = (
            x_sq[None, :, None]
            - 2.0 * np.einsum("nf,rkf->rnk", X, centers)
            + (centers**2).sum(axis=2)[:, None, :]
        )
        assign = d2.argmin(axis=2)  # (R, n)
        onehot = np.zeros((n_restarts, n, k))
        onehot[restart_rows[:, None], np.arange(n)[None, :], assign] = 1.0
        counts = onehot.sum(axis=1)  # (R, k)
        empties = np.argwhere(counts == 0)
        for r, j in empties:
            # Re-seed an empty cluster at that restart's worst-fit point.
            worst = int(np.argmax(d2[r, np.arange(n), assign[r]]))
            assign[r, worst] = j
            onehot[r, :, :] = 0.0
            onehot[r, np.arange(n), assign[r]] = 1.0
        if empties.size:
            counts = onehot.sum(axis=1)
        centers = np.einsum("rnk,nf->rkf", onehot, X) / counts[:, :, None]
        if prev_assign is not None and np.array_equal(assign, prev_assign):
            break
        prev_assign = assign

    d2 = (
        x_sq[None, :, None]
        - 2.0 * np.einsum("nf,rkf->rnk", X, centers)
        + (centers**2).sum(axis=2)[:, None, :]
    )
    inertia = d2.min(axis=2).sum(axis=1)
    best = int(np.argmin(inertia))
    return d2[best].argmin(axis=1), centers[best]


def estimate_discrete(A, n_d: int, beta: float, restarts: int = 10, seed=0,
                      m: int | None = None) -> MechanismEstimate:
    """Expected remaining uncertainty after the human picks one of n_d behaviors.

    Clusters whole flattened rollout trajectories by restarted k-means,
    then takes the cluster-size-weighted entropy at each step. Clusters
    too small for the spacing estimator contribute the Gaussian floor.
    """
    A = _check_tensor(A)
    n_a, n_r, T = A.shape
    if n_d < 2:
        raise ValueError("n_d must be >= 2")
    if n_r < n_d:
        raise ValueError(f"need at least n_d={n_d} rollouts, got {n_r}")

    X = A.transpose(1, 0, 2).reshape(n_r, n_a * T)
    assign, centers = _kmeans(X, n_d, restarts, seed)

    per_step = np.zeros(T)
    floored = []
    min_samples = 3  # spacing estimator needs 2*m+1 with m >= 1
    for j in range(n_d):
        members = np.flatnonzero(assign == j)
        weight = members.size / n_r
        if members.size < min_samples:
            per_step += weight * gaussian_entropy(n_a, beta)
            floored.append(j)
        else:
            per_step += weight * _per_step_entropy(A[:, members, :], beta, m)

    return MechanismEstimate(
        mechanism=discrete(n_d),
        per_step_entropy=per_step,
        human_input_k=float(n_d),
        cluster_assignments=assign,
        cluster_means=centers.reshape(n_d, n_a, T),
        floored_clusters=tuple(floored),
    )


def estimate_teleop(n_a: int, horizon: int, beta: float) -> MechanismEstimate:
    """Remaining uncertainty under full teleoperation: the closed-form
    noisily-optimal-human Gaussian at every step, independent of rollouts."""
    value = gaussian_entropy(n_a, beta)
    return MechanismEstimate(
        mechanism=TELEOP,
        per_step_entropy=np.full(horizon, value),
        human_input_k=float(n_a * horizon),
    )


def estimate_corrections(A, n_c: int, beta: float, n_synth: int | None = None,
                         seed=0, m: int | None = None) -> MechanismEstimate:
    """Remaining uncertainty if the human controls the top n_c action directions.

    Per step: center the slice, SVD it, replace components along the top
    n_c principal directions with noisily-optimal Gaussian draws of
    variance 1/beta, keep the original residual components along the
    remaining directions, and take the sample entropy of the recomposed
    samples. Zero-variance slices fall back to the identity basis and are
    flagged.
    """
    A = _check_tensor(A)
    n_a, n_r, T = A.shape
    if not 1 <= n_c < n_a:
        raise ValueError(f"n_c must satisfy 1 <= n_c < n_a={n_a}, got {n_c}")
    if n_r < 2:
        raise ValueError("need at least 2 rollouts")
    if n_synth is None:
        n_synth = n_r

    slices = A.transpose(2, 0, 1)  # (T, n_a, n_r)
    mu = slices.mean(axis=2, keepdims=True)
    centered = slices - mu

    u_mats, svals, _ = np.linalg.svd(centered, full_matrices=True)
    degenerate = np.flatnonzero(svals.max(axis=1) < 1e-12)
    if degenerate.size:
        u_mats[degenerate] = np.eye(n_a)

    P = u_mats[:, :, :n_c]  # (T, n_a, n_c)
    rng = np.random.default_rng(seed)
    synth = rng.normal(0.0, 1.0 / np.sqrt(beta), size=(T, n_c, n_synth))
    resid = centered - P @ (P.transpose(0, 2, 1) @ centered)
    if n_synth != n_r:
        resid = resid[:, :, rng.integers(0, n_r, size=n_synth)]
    recomposed = mu + P @ synth + resid  # (T, n_a, n_synth)

    rows = recomposed.reshape(T * n_a, n_synth)
    per_dim = sample_entropy_rows(rows, m=m, floor=gaussian_entropy(1, beta))
    per_step = per_dim.reshape(T, n_a).sum(axis=1)

    return MechanismEstimate(
        mechanism=corrections(n_c),
        per_step_entropy=per_step,
        human_input_k=float(n_c * T),
        principal_directions=np.ascontiguousarray(P.transpose(0, 2, 1)),
        degenerate_steps=tuple(int(t) for t in degenerate),
    )
