"""Small statistical helpers shared by the experiment runners and tests."""

from __future__ import annotations

import math

import numpy as np

Z_95 = 1.959963984540054  # two-sided 95% normal quantile


def wilson_interval(successes: int, trials: int, z: float = Z_95) -> tuple[float, float, float]:
    """Wilson score interval: (point estimate, lower, upper).

    The returned interval always contains the point estimate p_hat = k/n.
    """
    if trials <= 0:
        raise ValueError("trials must be positive")
    if not 0 <= successes <= trials:
        raise ValueError("successes outside [0, trials]")
    p_hat = successes / trials
    denom = 1.0 + z * z / trials
    center = (p_hat + z * z / (2.0 * trials)) / denom
    half = (z / denom) * math.sqrt(p_hat * (1.0 - p_hat) / trials + z * z / (4.0 * trials * trials))
    return p_hat, max(0.0, center - half), min(1.0, center + half)


def wilson_halfwidth(successes: int, trials: int, z: float = Z_95) -> float:
    _, lo, hi = wilson_interval(successes, trials, z)
    return 0.5 * (hi - lo)


def ks_distance(samples: np.ndarray, cdf) -> float:
    """Kolmogorov-Smirnov sup distance between a sample and a CDF callable."""
    x = np.sort(np.asarray(samples, dtype=np.float64))
    n = x.size
    if n == 0:
        raise ValueError("empty sample")
    f = np.asarray(cdf(x), dtype=np.float64)
    upper = np.max(np.arange(1, n + 1) / n - f)
    lower = np.max(f - np.arange(0, n) / n)
    return float(max(upper, lower))


def mean_and_se(values: np.ndarray) -> tuple[float, float]:
    """Sample mean and its standard error (ddof=1)."""
    v = np.asarray(values, dtype=np.float64)
    if v.size < 2:
        raise ValueError("need at least two values")
    return float(v.mean()), float(v.std(ddof=1) / math.sqrt(v.size))


def quantiles(values: np.ndarray, qs=(0.25, 0.5, 0.75, 0.95)) -> dict[str, float]:
    v = np.asarray(values, dtype=np.float64)
    out = {f"q{int(round(q * 100)):02d}": float(np.quantile(v, q)) for q in qs}
    out["mean"] = float(v.mean())
    out["max"] = float(v.max()) if v.size else math.nan
    return out
