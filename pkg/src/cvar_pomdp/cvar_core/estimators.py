"""Empirical CVaR / VaR and upper-tail quantile integrals."""

from __future__ import annotations

import numpy as np

from ..errors import InvalidInputError
from .types import DiscreteCdf, SortedSample, check_alpha


def _as_sample(sample) -> SortedSample:
    if isinstance(sample, SortedSample):
        return sample
    return SortedSample.from_values(sample)


def empirical_cvar(sample: SortedSample, alpha: float) -> float:
    """Order-statistic CVaR of the empirical distribution.

    ``z_n - (1/alpha) * sum_{i=1}^{n-1} (z_{i+1} - z_i) * (i/n - (1 - alpha))^+``
    with 1-based order statistics. Equals ``min_w w + E[(X - w)^+] / alpha``.
    """
    sample = _as_sample(sample)
    alpha = check_alpha(alpha)
    z = sample.values
    n = z.size
    if n == 1:
        return float(z[0])
    i = np.arange(1, n)
    coeff = np.maximum(i / n - (1.0 - alpha), 0.0)
    return float(z[-1] - np.dot(np.diff(z), coeff) / alpha)


def empirical_var(sample: SortedSample, alpha: float) -> float:
    """``inf{x : F_n(x) > 1 - alpha}`` on the empirical CDF."""
    sample = _as_sample(sample)
    alpha = check_alpha(alpha)
    n = sample.n
    # smallest 1-based j with j/n > 1 - alpha
    j = int(np.floor(n * (1.0 - alpha) + 1e-9)) + 1
    return float(sample.values[min(j, n) - 1])


def tail_integral_knots(xs: np.ndarray, cum: np.ndarray, beta: float) -> float:
    """``int_{1-beta}^1 q(v) dv`` for the step quantile of knots ``xs`` with CDF ``cum``.

    Equals ``beta * CVaR_beta`` and is 0 at ``beta = 0``.
    """
    if beta < 0 or beta > 1 + 1e-12:
        raise InvalidInputError(f"tail level must lie in [0, 1], got {beta}")
    if beta <= 0:
        return 0.0
    prev = np.concatenate(([0.0], cum[:-1]))
    lo = np.maximum(prev, 1.0 - min(beta, 1.0))
    overlap = np.clip(cum - lo, 0.0, None)
    return float(np.dot(xs, overlap))


def tail_integral(sample: SortedSample, beta: float) -> float:
    """Upper-tail quantile integral of the empirical distribution of ``sample``."""
    sample = _as_sample(sample)
    n = sample.n
    cum = np.arange(1, n + 1) / n
    return tail_integral_knots(sample.values, cum, beta)


def cdf_tail_integral(cdf: DiscreteCdf, beta: float) -> float:
    return tail_integral_knots(cdf.xs, cdf.probs, beta)


def cdf_cvar(cdf: DiscreteCdf, alpha: float) -> float:
    """CVaR at level ``alpha`` of a step CDF (mean of the upper alpha tail)."""
    alpha = check_alpha(alpha)
    return cdf_tail_integral(cdf, alpha) / alpha


def cdf_var(cdf: DiscreteCdf, alpha: float) -> float:
    alpha = check_alpha(alpha)
    above = cdf.probs > 1.0 - alpha + 1e-12
    idx = int(np.argmax(above)) if above.any() else cdf.xs.size - 1
    return float(cdf.xs[idx])


def eq9_objective(values: np.ndarray, alpha: float, w) -> np.ndarray:
    """Infimum-form objective ``w + mean((X - w)^+) / alpha`` evaluated at each ``w``."""
    values = np.asarray(values, dtype=float)
    w = np.atleast_1d(np.asarray(w, dtype=float))
    excess = np.maximum(values[None, :] - w[:, None], 0.0).mean(axis=1)
    return w + excess / alpha
