"""Concentration bounds on CVaR: baselines, ECDF envelopes and auxiliary-variable bounds.

All upper/lower bounds here are expressed through the upper-tail quantile
integral ``S(beta) = beta * CVaR_beta``, which keeps the boundary levels
(``beta = 0`` and ``beta = 1``) well defined.
"""

from __future__ import annotations

from enum import Enum
from typing import Callable, NamedTuple

import numpy as np

from ..errors import InvalidInputError
from .estimators import empirical_cvar, tail_integral, tail_integral_knots
from .types import RiskParams, SortedSample, check_alpha, check_unit, dkw_radius


class Branch(str, Enum):
    INFORMATIVE = "informative"
    COLLAPSED = "collapsed"
    COLLAPSED_PARTIAL = "collapsed-partial"

    def __str__(self) -> str:
        return self.value


class BranchPair(NamedTuple):
    upper: Branch
    lower: Branch


class AuxBounds(NamedTuple):
    lower: float
    upper: float
    branch: BranchPair


class SampleAuxBounds(NamedTuple):
    lower: float
    upper: float
    eps_prime: float
    branch: BranchPair


def upper_branch(alpha: float, eps: float) -> Branch:
    return Branch.INFORMATIVE if alpha > eps else Branch.COLLAPSED


def lower_branch(alpha: float, eps: float) -> Branch:
    return Branch.INFORMATIVE if alpha + eps < 1.0 else Branch.COLLAPSED_PARTIAL


def shifted_upper(tail: Callable[[float], float], alpha: float, eps: float, hi: float | None) -> float:
    """CVaR of the envelope that moves ``eps`` of the mass to ``hi``."""
    if hi is None:
        if eps == 0:
            return tail(alpha) / alpha
        raise InvalidInputError("upper bound requires an upper support value")
    if alpha > eps:
        return (tail(alpha - eps) + eps * hi) / alpha
    return float(hi)


def shifted_lower(tail: Callable[[float], float], alpha: float, eps: float, lo: float | None) -> float:
    """CVaR of the envelope that moves ``eps`` of the mass to ``lo``."""
    if alpha + eps < 1.0:
        return (tail(alpha + eps) - tail(eps)) / alpha
    if lo is None:
        if alpha + eps == 1.0:
            return (tail(1.0) - tail(eps)) / alpha
        raise InvalidInputError("lower bound branch alpha + eps > 1 requires a lower support value")
    return (tail(1.0) - tail(eps) + (alpha + eps - 1.0) * lo) / alpha


def _sample_tail(sample: SortedSample) -> Callable[[float], float]:
    """O(1) evaluations of ``int_{1-beta}^1 q_n`` after one suffix sum over the sample."""
    z = sample.values
    n = z.size
    top = np.concatenate(([0.0], np.cumsum(z[::-1])))

    def tail(beta: float) -> float:
        m = min(max(beta, 0.0), 1.0) * n
        k = min(int(np.floor(m)), n)
        if k == n:
            return float(top[n] / n)
        return float((top[k] + (m - k) * z[n - k - 1]) / n)

    return tail


# ---------------------------------------------------------------- baselines


def brown_bounds(sample: SortedSample, params: RiskParams) -> tuple[float, float]:
    """Deviation bounds around the empirical CVaR for bounded losses."""
    a, b = sample.support_lo, sample.support_hi
    if a is None or b is None:
        raise InvalidInputError("brown_bounds requires both support bounds")
    n, alpha, delta = sample.n, params.alpha, params.delta
    c_hat = empirical_cvar(sample, alpha)
    width = b - a
    up = width * np.sqrt(5.0 * np.log(3.0 / delta) / (alpha * n))
    down = width / alpha * np.sqrt(np.log(1.0 / delta) / (2.0 * n))
    return float(c_hat - down), float(c_hat + up)


def thomas_upper_bound(sample: SortedSample, params: RiskParams) -> float:
    b = sample.support_hi
    if b is None:
        raise InvalidInputError("thomas_upper_bound requires support_hi")
    z = np.append(sample.values, b)
    n = sample.n
    eps = dkw_radius(n, params.delta)
    i = np.arange(1, n + 1)
    coeff = np.maximum(i / n - eps - (1.0 - params.alpha), 0.0)
    return float(b - np.dot(np.diff(z), coeff) / params.alpha)


def thomas_lower_bound(sample: SortedSample, params: RiskParams) -> float:
    a = sample.support_lo
    if a is None:
        raise InvalidInputError("thomas_lower_bound requires support_lo")
    z = np.insert(sample.values, 0, a)
    n = sample.n
    eps = dkw_radius(n, params.delta)
    i = np.arange(0, n)
    coeff = np.maximum(np.minimum(1.0, i / n + eps) - (1.0 - params.alpha), 0.0)
    return float(z[-1] - np.dot(np.diff(z), coeff) / params.alpha)


# ---------------------------------------------------------------- ECDF bounds


def ecdf_upper_bound(sample: SortedSample, params: RiskParams) -> float:
    eps = dkw_radius(sample.n, params.delta)
    if sample.support_hi is None:
        raise InvalidInputError("ECDF upper bound requires support_hi")
    return shifted_upper(_sample_tail(sample), params.alpha, eps, sample.support_hi)


def ecdf_lower_bound(sample: SortedSample, params: RiskParams) -> float:
    eps = dkw_radius(sample.n, params.delta)
    return shifted_lower(_sample_tail(sample), params.alpha, eps, sample.support_lo)


def ecdf_concentration_bounds(sample: SortedSample, params: RiskParams) -> tuple[float, float]:
    """DKW-envelope bounds ``(lower, upper)``; each side holds w.p. at least ``1 - delta``."""
    return ecdf_lower_bound(sample, params), ecdf_upper_bound(sample, params)


# ---------------------------------------------------------------- auxiliary variable


def _support_extreme(values, pick) -> float | None:
    vals = [v for v in values if v is not None]
    if len(vals) != len(values):
        return None
    return float(pick(vals))


def aux_cvar_bounds(
    alpha: float,
    epsilon: float,
    supports: tuple,
    cvar_Y: Callable[[float], float],
    mean_Y: float,
) -> AuxBounds:
    """Bounds on ``CVaR_alpha(X)`` from the CVaR functional of ``Y`` when ``sup|F_X - F_Y| <= epsilon``.

    ``supports`` is ``(a_X, b_X, a_Y, b_Y)``; entries may be ``None`` when the
    branch that would need them is not taken.
    """
    alpha = check_alpha(alpha)
    eps = check_unit("epsilon", epsilon)
    a_x, b_x, a_y, b_y = supports
    hi = _support_extreme((b_x, b_y), max)
    lo = _support_extreme((a_x, a_y), min)

    def tail(beta: float) -> float:
        if beta <= 0:
            return 0.0
        if beta >= 1.0:
            return float(mean_Y)
        return beta * float(cvar_Y(beta))

    upper = shifted_upper(tail, alpha, eps, hi)
    lower = shifted_lower(tail, alpha, eps, lo)
    return AuxBounds(float(lower), float(upper), BranchPair(upper_branch(alpha, eps), lower_branch(alpha, eps)))


def aux_cvar_bounds_from_samples(
    sample_Y: SortedSample,
    alpha: float,
    epsilon: float,
    delta: float,
    supports: tuple | None = None,
) -> SampleAuxBounds:
    """Sample version: the discrepancy is inflated by the DKW radius of the ``Y`` sample."""
    alpha = check_alpha(alpha)
    eps = check_unit("epsilon", epsilon)
    if not (0.0 < delta <= 0.5):
        raise InvalidInputError(f"delta must lie in (0, 0.5], got {delta}")
    if supports is None:
        supports = (None, None, None, None)
    a_x, b_x, a_y, b_y = supports
    a_y = sample_Y.support_lo if a_y is None else a_y
    b_y = sample_Y.support_hi if b_y is None else b_y
    # X's support defaults to Y's when not given separately
    a_x = a_y if a_x is None else a_x
    b_x = b_y if b_x is None else b_x
    hi = _support_extreme((b_x, b_y), max)
    lo = _support_extreme((a_x, a_y), min)
    eta = dkw_radius(sample_Y.n, delta)
    eps_p = min(eps + eta, 1.0)
    tail = _sample_tail(sample_Y)
    upper = shifted_upper(tail, alpha, eps_p, hi)
    lower = shifted_lower(tail, alpha, eps_p, lo)
    return SampleAuxBounds(
        float(lower), float(upper), eps_p, BranchPair(upper_branch(alpha, eps_p), lower_branch(alpha, eps_p))
    )


__all__ = [
    "Branch",
    "BranchPair",
    "AuxBounds",
    "SampleAuxBounds",
    "brown_bounds",
    "thomas_upper_bound",
    "thomas_lower_bound",
    "ecdf_upper_bound",
    "ecdf_lower_bound",
    "ecdf_concentration_bounds",
    "aux_cvar_bounds",
    "aux_cvar_bounds_from_samples",
    "shifted_upper",
    "shifted_lower",
    "tail_integral",
]
