"""Small shared statistics helpers: KS distances and compensated sums."""

from __future__ import annotations

import numpy as np

__all__ = ["ks_distance_vs_cdf", "ks_distance_two_sample", "kahan_sum"]


def ks_distance_vs_cdf(samples, cdf) -> float:
    """sup |empirical CDF - cdf| over the sample points."""
    x = np.sort(np.asarray(samples, dtype=float))
    n = len(x)
    f = np.asarray(cdf(x), dtype=float)
    upper = np.max(np.arange(1, n + 1) / n - f)
    lower = np.max(f - np.arange(0, n) / n)
    return float(max(upper, lower))


def ks_distance_two_sample(a, b) -> float:
    """sup distance between two empirical CDFs."""
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    grid = np.concatenate([a, b])
    fa = np.searchsorted(a, grid, side="right") / len(a)
    fb = np.searchsorted(b, grid, side="right") / len(b)
    return float(np.max(np.abs(fa - fb)))


def kahan_sum(values) -> float:
    """Compensated summation; order-stable to the last bit."""
    total = 0.0
    comp = 0.0
    for v in values:
        y = float(v) - comp
        t = total + y
        comp = (t - total) - y
        total = t
    return total
