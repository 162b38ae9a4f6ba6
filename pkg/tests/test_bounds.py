import dataclasses

import numpy as np
import pytest

from cvar_pomdp.bounds import (
    CvarBoundResult,
    ReturnBounds,
    ReturnSource,
    bound_width_curve,
    compute_q_bounds,
    eliminate_actions,
    estimate_return_bounds,
    q_bounds_from_sample,
    theoretical_q_bounds,
)
from cvar_pomdp.cvar_core import (
    Branch,
    RiskParams,
    SortedSample,
    cdf_cvar,
    dkw_radius,
    ecdf_concentration_bounds,
    lower_branch,
    upper_branch,
)
from cvar_pomdp.environments import ToyChain, ToyChainConfig, enumerate_epsilon, enumerate_return_distribution
from cvar_pomdp.errors import InvalidInputError
from cvar_pomdp.pomdp_core import ORIGINAL, SIMPLIFIED, OpenLoopSequence, gen_belief_trajectories, returns_from_batch


def _interval(lo, hi, alpha=0.5, delta=0.05):
    s = SortedSample.from_values([lo, hi])
    r = q_bounds_from_sample(s, RiskParams(alpha, delta), 0.0)
    return dataclasses.replace(r, lower=lo, upper=hi)


class TestReturnBounds:
    def test_constant_returns(self):
        rb = estimate_return_bounds(SortedSample.from_values([3.0] * 7), 0.0)
        assert rb.d_min == rb.d_max == 3.0

    def test_closed_form_guarantee(self):
        rb = estimate_return_bounds(SortedSample.from_values(np.arange(1000.0)), 0.0)
        assert rb.guarantee_simplified == rb.guarantee_original == pytest.approx(1000 / 1001)
        rb = estimate_return_bounds(SortedSample.from_values(np.arange(1000.0)), 0.3)
        assert rb.guarantee_original == pytest.approx(1000 / 1001 - 0.3)
        assert estimate_return_bounds(SortedSample.from_values([1.0]), 0.9).guarantee_original == 0.0

    def test_trivial(self):
        c = ToyChain()
        rb = ReturnBounds.trivial(c, 2)
        assert (rb.d_min, rb.d_max) == (3 * c.r_min, 3 * c.r_max)
        assert rb.source == ReturnSource.TRIVIAL and rb.guarantee_original == 1.0

    def test_invalid(self):
        with pytest.raises(InvalidInputError):
            ReturnBounds(2.0, 1.0, ReturnSource.ESTIMATED, 0.9, 0.9)
        with pytest.raises(InvalidInputError):
            estimate_return_bounds(SortedSample.from_values([1.0]), 1.5)


class TestTheoretical:
    def test_zero_eps(self):
        lo, up, _ = theoretical_q_bounds(lambda b: 2.0 - b, 0.3, 0.0, 0.0, 5.0)
        assert lo == pytest.approx(1.7) and up == pytest.approx(1.7)

    def test_collapse(self):
        lo, up, br = theoretical_q_bounds(lambda b: 2.0 - b, 0.3, 0.4, 0.0, 5.0)
        assert up == 5.0 and br.upper == Branch.COLLAPSED

    def test_toy_chain_sandwich(self):
        c = ToyChain()
        for script in ([0, 0, 0], [1, 0, 1], [1, 1, 1], [0, 1, 0]):
            pol = OpenLoopSequence(script)
            q_s = enumerate_return_distribution(c, pol, script[0], 2, SIMPLIFIED)
            q_m = enumerate_return_distribution(c, pol, script[0], 2, ORIGINAL, update_variant=SIMPLIFIED)
            eps = enumerate_epsilon(c, pol, script[0], 2)
            d_min = min(q_s.xs[0], q_m.xs[0])
            d_max = max(q_s.xs[-1], q_m.xs[-1])
            for alpha in (0.1, 0.25, 0.5, 0.75, 1.0):
                truth = cdf_cvar(q_m, alpha)
                for e in (eps, eps + 0.1, 0.6):
                    lo, up, _ = theoretical_q_bounds(lambda b: cdf_cvar(q_s, b), alpha, min(e, 1.0), d_min, d_max)
                    assert lo - 1e-9 <= truth <= up + 1e-9


class TestSampleBounds:
    def test_zero_gap_reduces_to_ecdf(self):
        c = ToyChain(ToyChainConfig(obs_simplified=ToyChainConfig().obs_original))
        pol = OpenLoopSequence([1, 0, 1])
        p = RiskParams(0.25, 0.05)
        r = compute_q_bounds(c.initial_belief(), 1, pol, p, 2, 400, c, c.exact_table(), 3, rng=11)
        assert r.epsilon == 0.0
        batch = gen_belief_trajectories(c.initial_belief(), pol, 2, 400, c, SIMPLIFIED, 11, first_action=1, update_variant=SIMPLIFIED)
        s = returns_from_batch(batch, c)
        lo, up = ecdf_concentration_bounds(s.with_support(s.values[0], s.values[-1]), p)
        assert r.lower == pytest.approx(lo, abs=1e-12) and r.upper == pytest.approx(up, abs=1e-12)

    def test_fields_and_branches(self):
        rng = np.random.default_rng(0)
        s = SortedSample.from_values(rng.uniform(0, 1, 300))
        for eps in (0.0, 0.2, 0.45, 0.9):
            r = q_bounds_from_sample(s, RiskParams(0.5, 0.05), eps)
            assert r.eta == pytest.approx(dkw_radius(300, 0.05))
            assert r.eps_prime == pytest.approx(min(eps + r.eta, 1.0))
            assert r.branch_upper == upper_branch(0.5, r.eps_prime)
            assert r.branch_lower == lower_branch(0.5, r.eps_prime)
            assert r.lower <= r.upper
            if r.branch_upper == Branch.COLLAPSED:
                assert r.upper == r.return_bounds.d_max
            assert r.guarantee_lower == pytest.approx(0.95 * max(0.0, 300 / 301 - eps))
            assert r.informative == (300 / 301 - eps > 0)

    def test_trivial_guarantee(self):
        c = ToyChain()
        pol = OpenLoopSequence([0, 0, 0])
        r = compute_q_bounds(
            c.initial_belief(), 0, pol, RiskParams(0.5, 0.1), 2, 100, c, c.exact_table(), 3, rng=1, trivial_return_bounds=True
        )
        assert r.guarantee_lower == pytest.approx(0.9)
        assert r.return_bounds.d_max == 3 * c.r_max

    def test_monotone_degradation(self):
        rng = np.random.default_rng(1)
        s = SortedSample.from_values(rng.beta(2, 5, 500))
        curve = bound_width_curve(s, RiskParams(0.3, 0.05), np.linspace(0, 1, 41))
        assert np.all(np.diff(curve[:, 1]) >= -1e-12)
        assert np.all(np.diff(curve[:, 0]) <= 1e-12)

    def test_delta_range(self):
        c = ToyChain()
        with pytest.raises(InvalidInputError):
            compute_q_bounds(c.initial_belief(), 0, OpenLoopSequence([0]), RiskParams(0.5, 0.5), 0, 10, c, c.exact_table(), 3)

    def test_result_invariants(self):
        r = _interval(1.0, 2.0)
        with pytest.raises(InvalidInputError):
            dataclasses.replace(r, lower=3.0)
        with pytest.raises(InvalidInputError):
            wrong = Branch.INFORMATIVE if r.branch_upper == Branch.COLLAPSED else Branch.COLLAPSED
            dataclasses.replace(r, branch_upper=wrong)
        row = r.to_row()
        assert row["branch_upper"] == str(r.branch_upper) and "return_d_max" in row


class TestElimination:
    def test_single(self):
        assert eliminate_actions({"a": _interval(1, 2)}) == (["a"], [])

    def test_disjoint(self):
        assert eliminate_actions({"a": _interval(1, 2), "b": _interval(5, 6)}) == (["a"], ["b"])

    def test_touching_kept(self):
        assert eliminate_actions({"a": _interval(1, 2), "b": _interval(2, 6)}) == (["a", "b"], [])

    def test_errors(self):
        with pytest.raises(InvalidInputError):
            eliminate_actions({})
        with pytest.raises(InvalidInputError):
            eliminate_actions({"a": _interval(1, 2, alpha=0.5), "b": _interval(5, 6, alpha=0.2)})

    def test_result_type(self):
        assert isinstance(_interval(1, 2), CvarBoundResult)
