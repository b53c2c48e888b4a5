"""Differential entropy machinery.

Spacing-based sample entropy (Ebrahimi boundary correction), multivariate
aggregation with per-dimension floors, and the closed-form Gaussian and
uniform bounds used to normalize entropies into likelihoods.

All entropies are in nats.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = [
    "DEFAULT_BETA",
    "gaussian_entropy",
    "uniform_entropy_upper",
    "sample_entropy_1d",
    "sample_entropy_rows",
    "sample_entropy_multi",
]

LOG_2PI = math.log(2.0 * math.pi)

# Inverse variance of the modeled human's action noise: sigma = 0.001.
DEFAULT_BETA = 1e6


def gaussian_entropy(n_a: int, beta: float) -> float:
    """Entropy of an isotropic n_a-dim Gaussian with per-dim variance 1/beta.

    0.5*ln(beta^-n_a) + (n_a/2)*(1 + ln 2*pi). This is the floor used for
    noisily-optimal human actions: the lowest achievable post-intervention
    uncertainty.
    """
    if n_a < 1:
        raise ValueError(f"n_a must be >= 1, got {n_a}")
    if not beta > 0:
        raise ValueError(f"beta must be > 0, got {beta}")
    return -0.5 * n_a * math.log(beta) + 0.5 * n_a * (1.0 + LOG_2PI)


def uniform_entropy_upper(ranges) -> float:
    """Entropy of a uniform distribution over a per-dimension action box.

    ``ranges`` is a sequence of (min, max) pairs, one per action dimension.
    Returns ln(prod_i (max_i - min_i)), the conservative upper entropy bound.
    """
    box = np.asarray(ranges, dtype=float)
    if box.ndim != 2 or box.shape[1] != 2 or box.shape[0] < 1:
        raise ValueError(f"ranges must be an (n_a, 2) array, got shape {box.shape}")
    widths = box[:, 1] - box[:, 0]
    if np.any(widths <= 0):
        bad = int(np.argmax(widths <= 0))
        raise ValueError(f"degenerate range at dimension {bad}: max <= min")
    return float(np.log(widths).sum())


def _spacing_order(n: int) -> int:
    return max(1, int(math.isqrt(n)))


def sample_entropy_rows(rows: np.ndarray, m: int | None = None, floor: float | None = None) -> np.ndarray:
    """Ebrahimi m-spacing entropy estimate for each row of a (k, n) array.

    Vectorized batch form of :func:`sample_entropy_1d`; the hot path for
    per-step, per-dimension estimates. Rows with degenerate spacings (ties
    spanning the spacing window) come out at ``floor`` instead of -inf.
    """
    x = np.asarray(rows, dtype=float)
    if x.ndim != 2:
        raise ValueError(f"expected a 2-D (rows, samples) array, got shape {x.shape}")
    n = x.shape[1]
    if m is None:
        m = _spacing_order(n)
    if m < 1:
        raise ValueError(f"spacing order m must be >= 1, got {m}")
    if n < 2 * m + 1:
        raise ValueError(f"need at least 2*m+1 = {2 * m + 1} samples, got {n}")
    if floor is None:
        floor = gaussian_entropy(1, DEFAULT_BETA)

    xs = np.sort(x, axis=1)
    # Clamp out-of-range order statistics to the extremes by edge-padding.
    padded = np.concatenate(
        [
            np.broadcast_to(xs[:, :1], (xs.shape[0], m)),
            xs,
            np.broadcast_to(xs[:, -1:], (xs.shape[0], m)),
        ],
        axis=1,
    )
    spacings = padded[:, 2 * m:] - padded[:, : -2 * m]  # x_(i+m) - x_(i-m), i = 1..n

    i = np.arange(1, n + 1, dtype=float)
    c = np.full(n, 2.0)
    c[i <= m] = 1.0 + (i[i <= m] - 1.0) / m
    c[i > n - m] = 1.0 + (n - i[i > n - m]) / m

    with np.errstate(divide="ignore"):
        logs = np.log(n * spacings / (c * m))
    h = logs.mean(axis=1)
    h = np.where(np.isfinite(h), h, floor)
    return np.maximum(h, floor)


def sample_entropy_1d(samples, m: int | None = None, floor: float | None = None) -> float:
    """Ebrahimi-corrected m-spacing entropy estimate of a scalar sample.

    Computes (1/n) * sum_i ln(n * (x_(i+m) - x_(i-m)) / (c_i * m)) over the
    sorted sample, with boundary weights c_i = 1 + (i-1)/m for i <= m,
    c_i = 2 in the interior, c_i = 1 + (n-i)/m for i > n-m, and order
    statistics clamped to the extremes. Defaults: m = floor(sqrt(n)),
    floor = the 1-D Gaussian floor at beta = 1e6.

    A degenerate sample (identical values) returns ``floor``, never -inf.
    """
    x = np.asarray(samples, dtype=float)
    if x.ndim != 1:
        raise ValueError(f"expected a 1-D sample, got shape {x.shape}")
    return float(sample_entropy_rows(x[None, :], m=m, floor=floor)[0])


def sample_entropy_multi(samples, beta: float, m: int | None = None) -> float:
    """Multivariate sample entropy as a floored per-dimension sum.

    ``samples`` is an (n_a, n) matrix of n draws of an n_a-dim action.
    Each dimension's spacing estimate is clamped to the 1-D Gaussian floor
    -0.5*ln(beta) + 0.5*(1 + ln 2*pi) before summing; the sum treats
    dimensions as independent, which over- rather than under-states the
    joint entropy.
    """
    x = np.asarray(samples, dtype=float)
    if x.ndim != 2:
        raise ValueError(f"expected an (n_a, n) matrix, got shape {x.shape}")
    per_dim = sample_entropy_rows(x, m=m, floor=gaussian_entropy(1, beta))
    return float(per_dim.sum())
