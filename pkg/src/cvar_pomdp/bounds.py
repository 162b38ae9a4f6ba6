"""Computable CVaR action-value bounds under a simplified observation model, and action elimination."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Any, Callable, Mapping

import numpy as np

from .cvar_core import (
    Branch,
    BranchPair,
    RiskParams,
    SortedSample,
    aux_cvar_bounds,
    check_unit,
    dkw_radius,
    empirical_cvar,
    lower_branch,
    shifted_lower,
    shifted_upper,
    upper_branch,
)
from .cvar_core.concentration import _sample_tail
from .discrepancy import DiscrepancyTable, EpsilonEstimate, epsilon_hat
from .errors import InvalidInputError
from .pomdp_core import (
    SIMPLIFIED,
    ParticleBelief,
    Policy,
    PomdpModel,
    as_generator,
    gen_belief_trajectories,
    return_support,
    returns_from_batch,
)


class ReturnSource(str, Enum):
    TRIVIAL = "trivial"
    ESTIMATED = "estimated"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class ReturnBounds:
    """Return extremes ``d_min <= d_max`` and the probability that each holds."""

    d_min: float
    d_max: float
    source: ReturnSource
    guarantee_simplified: float
    guarantee_original: float

    def __post_init__(self):
        if self.d_min > self.d_max:
            raise InvalidInputError(f"d_min {self.d_min} exceeds d_max {self.d_max}")
        for g in (self.guarantee_simplified, self.guarantee_original):
            if not 0.0 <= g <= 1.0:
                raise InvalidInputError("guarantee levels must lie in [0, 1]")

    @classmethod
    def trivial(cls, model: PomdpModel, horizon: int, discount: float | None = None) -> "ReturnBounds":
        """Worst-case extremes from the per-step cost range; they hold surely."""
        gamma = model.discount if discount is None else discount
        lo, hi = return_support(model, horizon, gamma, SIMPLIFIED)
        return cls(lo, hi, ReturnSource.TRIVIAL, 1.0, 1.0)


def estimate_return_bounds(returns: SortedSample, epsilon: float, n_b: int | None = None) -> ReturnBounds:
    """Sample min and max of simplified-model returns.

    A fresh return falls outside ``[min, max]`` on a given side with probability
    at most ``1/(N_b+1)`` by exchangeability; under the original model the
    discrepancy ``epsilon`` is subtracted.
    """
    if returns is None or len(returns) == 0:
        raise InvalidInputError("return sample is empty")
    eps = check_unit("epsilon", epsilon)
    n = returns.n if n_b is None else int(n_b)
    g = n / (n + 1.0)
    return ReturnBounds(
        float(returns.values[0]), float(returns.values[-1]), ReturnSource.ESTIMATED, g, max(0.0, g - eps)
    )


def theoretical_q_bounds(
    q_simplified: Callable[[float], float],
    alpha: float,
    epsilon: float,
    d_min: float,
    d_max: float,
) -> tuple[float, float, BranchPair]:
    """``(L, U, branches)`` from the exact simplified CVaR curve and a CDF gap ``epsilon``.

    ``q_simplified(beta)`` must return the simplified-model CVaR at level
    ``beta``; level 1 is the mean.
    """
    if d_min > d_max:
        raise InvalidInputError("d_min exceeds d_max")
    res = aux_cvar_bounds(alpha, epsilon, (d_min, d_max, d_min, d_max), q_simplified, q_simplified(1.0))
    return res.lower, res.upper, res.branch


@dataclass(frozen=True)
class CvarBoundResult:
    lower: float
    upper: float
    alpha: float
    delta: float
    epsilon: float
    eta: float
    eps_prime: float
    branch_upper: Branch
    branch_lower: Branch
    guarantee_lower: float
    guarantee_upper: float
    return_bounds: ReturnBounds
    n_b: int
    q_hat: float
    informative: bool = True
    action: Any = None
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.lower > self.upper + 1e-9 * max(1.0, abs(self.upper)):
            raise InvalidInputError(f"lower bound {self.lower} exceeds upper bound {self.upper}")
        if upper_branch(self.alpha, self.eps_prime) != self.branch_upper:
            raise InvalidInputError("upper branch inconsistent with (alpha, eps_prime)")
        if lower_branch(self.alpha, self.eps_prime) != self.branch_lower:
            raise InvalidInputError("lower branch inconsistent with (alpha, eps_prime)")

    def to_row(self) -> dict:
        row = asdict(self)
        row["branch_upper"] = str(self.branch_upper)
        row["branch_lower"] = str(self.branch_lower)
        rb = row.pop("return_bounds")
        rb["source"] = str(self.return_bounds.source)
        row.update({f"return_{k}": v for k, v in rb.items()})
        diag = row.pop("diagnostics")
        row.update({f"diag_{k}": v for k, v in diag.items()})
        if self.action is not None and not isinstance(self.action, (str, int)):
            row["action"] = str(self.action)
        return row


def q_bounds_from_sample(
    returns: SortedSample,
    params: RiskParams,
    epsilon: float,
    return_bounds: ReturnBounds | None = None,
    action=None,
    diagnostics: dict | None = None,
) -> CvarBoundResult:
    """Bounds on the original-model CVaR from a simplified-model return sample.

    The discrepancy is inflated to ``eps' = min(epsilon + eta, 1)`` with the DKW
    radius ``eta``; CVaR at the shifted levels is re-estimated from the same
    sample. Return extremes default to the sample min and max.
    """
    eps = check_unit("epsilon", epsilon)
    alpha, delta = params.alpha, params.delta
    n = returns.n
    rb = return_bounds if return_bounds is not None else estimate_return_bounds(returns, eps, n)
    eta = dkw_radius(n, delta)
    eps_p = min(eps + eta, 1.0)
    tail = _sample_tail(returns)
    upper = shifted_upper(tail, alpha, eps_p, rb.d_max)
    lower = shifted_lower(tail, alpha, eps_p, rb.d_min)
    if rb.source == ReturnSource.TRIVIAL:
        raw = 1.0
        g = 1.0 - delta
    else:
        raw = n / (n + 1.0) - eps
        g = (1.0 - delta) * max(0.0, raw)
    diag = dict(diagnostics or {})
    # conservative alternative to the product form: union bound over the two failure events
    diag["guarantee_union"] = max(0.0, 1.0 - delta - (1.0 - raw)) if rb.source == ReturnSource.ESTIMATED else 1.0 - delta
    return CvarBoundResult(
        lower=float(lower),
        upper=float(upper),
        alpha=alpha,
        delta=delta,
        epsilon=eps,
        eta=eta,
        eps_prime=eps_p,
        branch_upper=upper_branch(alpha, eps_p),
        branch_lower=lower_branch(alpha, eps_p),
        guarantee_lower=g,
        guarantee_upper=g,
        return_bounds=rb,
        n_b=n,
        q_hat=empirical_cvar(returns, alpha),
        informative=raw > 0,
        action=action,
        diagnostics=diag,
    )


def compute_q_bounds(
    belief: ParticleBelief,
    action,
    policy: Policy,
    params: RiskParams,
    horizon: int,
    n_b: int,
    model: PomdpModel,
    table: DiscrepancyTable,
    k: int,
    rng=None,
    *,
    trivial_return_bounds: bool = False,
    normalization: str = "self",
    discount: float | None = None,
    epsilon: float | None = None,
) -> CvarBoundResult:
    """Full pipeline for one action: simplified trajectories, epsilon estimate, shifted-level bounds.

    ``epsilon`` overrides the estimate (e.g. an exact value on enumerable models).
    With ``trivial_return_bounds`` the worst-case return range replaces the
    sample extremes and the guarantee becomes ``1 - delta``.
    """
    if not 0.0 < params.delta < 0.5:
        raise InvalidInputError("delta must lie in (0, 0.5)")
    rng = as_generator(rng)
    a = model.action_id(action)
    batch = gen_belief_trajectories(
        belief, policy, horizon, n_b, model, SIMPLIFIED, rng, first_action=a, update_variant=SIMPLIFIED
    )
    returns = returns_from_batch(batch, model, discount)
    est: EpsilonEstimate = epsilon_hat(batch, table, k, model, normalization)
    eps = est.value if epsilon is None else float(epsilon)
    rb = ReturnBounds.trivial(model, horizon, discount) if trivial_return_bounds else None
    diag = dict(est.diagnostics)
    diag.update(eps_hat=est.value, D_proxy=est.D, retries=int(batch.retries), eps_terms=[float(x) for x in est.terms])
    return q_bounds_from_sample(returns, params, eps, rb, action=action, diagnostics=diag)


def eliminate_actions(results: Mapping[Any, CvarBoundResult]) -> tuple[list, list]:
    """Discard actions whose lower bound exceeds the smallest upper bound (costs are minimized).

    Ties are retained, so at least one action always survives.
    """
    if not results:
        raise InvalidInputError("no bound results to compare")
    vals = list(results.values())
    a0, d0 = vals[0].alpha, vals[0].delta
    if any(not math.isclose(r.alpha, a0) or not math.isclose(r.delta, d0) for r in vals):
        raise InvalidInputError("all results must share alpha and delta")
    best_upper = min(r.upper for r in vals)
    retained = [a for a, r in results.items() if not r.lower > best_upper]
    eliminated = [a for a, r in results.items() if r.lower > best_upper]
    return retained, eliminated


def bound_width_curve(returns: SortedSample, params: RiskParams, epsilons) -> np.ndarray:
    """``(lower, upper)`` rows for each injected epsilon on a fixed sample."""
    rows = [q_bounds_from_sample(returns, params, float(e)) for e in epsilons]
    return np.array([(r.lower, r.upper) for r in rows])


__all__ = [
    "CvarBoundResult",
    "ReturnBounds",
    "ReturnSource",
    "bound_width_curve",
    "compute_q_bounds",
    "eliminate_actions",
    "estimate_return_bounds",
    "q_bounds_from_sample",
    "theoretical_q_bounds",
]
