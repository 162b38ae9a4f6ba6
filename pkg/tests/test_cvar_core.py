import numpy as np
import pytest
from scipy import stats

from cvar_pomdp.cvar_core import (
    Branch,
    DiscreteCdf,
    DistributionOracle,
    GridFunction,
    RiskParams,
    SortedSample,
    aux_cvar_bounds,
    aux_cvar_bounds_from_samples,
    brown_bounds,
    cdf_cvar,
    cumulative_gap,
    dkw_radius,
    ecdf_concentration_bounds,
    empirical_cvar,
    empirical_var,
    envelope_cdf_from_density_gap,
    envelope_cdf_lower,
    eq9_objective,
    ks_distance,
    oracle_cvar,
    thomas_lower_bound,
    thomas_upper_bound,
)
from cvar_pomdp.errors import InvalidInputError


def grid_min_eq9(values, alpha):
    """Independent oracle: minimize the infimum form over sample points plus a dense grid."""
    v = np.asarray(values, dtype=float)
    w = np.union1d(v, np.linspace(v.min() - 1, v.max() + 1, 2001))
    return float(eq9_objective(v, alpha, w).min())


def truncnorm_cvar(alpha, lo=-1.0, hi=1.0):
    """Closed-form upper-tail mean of a standard Normal truncated to [lo, hi]."""
    Phi, phi = stats.norm.cdf, stats.norm.pdf
    z = Phi(lo) + (1 - alpha) * (Phi(hi) - Phi(lo))
    q = stats.norm.ppf(z)
    return (phi(q) - phi(hi)) / (Phi(hi) - Phi(q))


# -- estimators


class TestEmpiricalCvar:
    def test_constant_sample(self):
        assert empirical_cvar(SortedSample.from_values([5, 5, 5, 5]), 0.3) == 5.0

    def test_alpha_one_is_mean(self):
        assert empirical_cvar(SortedSample.from_values([1, 2, 3, 4]), 1.0) == pytest.approx(2.5, abs=1e-12)

    def test_top_quarter(self):
        s = SortedSample.from_values([1, 2, 3, 4])
        assert empirical_cvar(s, 0.25) == pytest.approx(4.0, abs=1e-12)
        assert grid_min_eq9([1, 2, 3, 4], 0.25) == pytest.approx(4.0, abs=1e-12)

    def test_matches_infimum_form(self):
        rng = np.random.default_rng(3)
        for _ in range(200):
            n = int(rng.integers(1, 51))
            x = rng.normal(size=n)
            a = float(rng.uniform(0.01, 1.0))
            assert abs(empirical_cvar(SortedSample.from_values(x), a) - grid_min_eq9(x, a)) < 1e-8

    def test_translation_and_scale(self):
        rng = np.random.default_rng(4)
        x = rng.exponential(size=37)
        base = empirical_cvar(SortedSample.from_values(x), 0.3)
        moved = empirical_cvar(SortedSample.from_values(2.5 + 3.0 * x), 0.3)
        assert moved == pytest.approx(2.5 + 3.0 * base, rel=1e-12)

    def test_monotone_under_dominance(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            b = np.sort(rng.normal(size=20))
            a = b + rng.uniform(0, 1, size=20)
            assert empirical_cvar(SortedSample.from_values(a), 0.2) >= empirical_cvar(SortedSample.from_values(b), 0.2)

    def test_empty_rejected(self):
        with pytest.raises(InvalidInputError):
            SortedSample.from_values([])

    def test_bad_alpha(self):
        with pytest.raises(InvalidInputError):
            empirical_cvar(SortedSample.from_values([1.0]), 0.0)


class TestEmpiricalVar:
    def test_examples(self):
        assert empirical_var(SortedSample.from_values([1, 2, 3, 4]), 0.25) == 4
        assert empirical_var(SortedSample.from_values([7]), 0.4) == 7
        # F(0) = 0.5 is not strictly above 0.5
        assert empirical_var(SortedSample.from_values([0, 10]), 0.5) == 10

    def test_scan_oracle(self):
        rng = np.random.default_rng(6)
        x = np.sort(rng.integers(0, 5, size=30).astype(float))
        for a in (0.1, 0.33, 0.5, 0.9):
            F = np.searchsorted(x, x, side="right") / x.size
            expect = x[np.argmax(F > 1 - a)]
            assert empirical_var(SortedSample.from_values(x), a) == expect


# -- concentration bounds


def beta_sample(rng, n, a=2.0, b=2.0):
    return SortedSample.from_values(rng.beta(a, b, size=n), 0.0, 1.0)


class TestThomas:
    def test_upper_at_support(self):
        s = SortedSample.from_values([3.0] * 10, 0.0, 3.0)
        assert thomas_upper_bound(s, RiskParams(0.2)) == 3.0

    def test_lower_at_support(self):
        s = SortedSample.from_values([1.0] * 10, 1.0, 4.0)
        assert thomas_lower_bound(s, RiskParams(0.2)) == pytest.approx(1.0, abs=1e-12)

    def test_frozen_small_sample(self):
        s = SortedSample.from_values([1, 2, 3, 4], 0, 5)
        p = RiskParams(0.25, 0.05)
        assert thomas_upper_bound(s, p) == pytest.approx(5.0, abs=1e-12)
        assert thomas_lower_bound(s, p) == pytest.approx(1.5522531693191834, abs=1e-12)

    def test_sandwich_empirical(self):
        rng = np.random.default_rng(7)
        p = RiskParams(0.1, 0.05)
        for _ in range(50):
            s = beta_sample(rng, 1000)
            c = empirical_cvar(s, 0.1)
            assert thomas_lower_bound(s, p) <= c <= thomas_upper_bound(s, p)

    def test_gap_shrinks_with_n(self):
        rng = np.random.default_rng(8)
        base = rng.beta(2, 2, size=100)
        p = RiskParams(0.2, 0.05)
        gaps = []
        for reps in (1, 10, 100):
            s = SortedSample.from_values(np.tile(base, reps), 0.0, 1.0)
            gaps.append(thomas_upper_bound(s, p) - empirical_cvar(s, 0.2))
        assert gaps[0] > gaps[1] > gaps[2] > 0

    def test_missing_support(self):
        s = SortedSample.from_values([0.1, 0.2])
        with pytest.raises(InvalidInputError):
            thomas_upper_bound(s, RiskParams(0.5))
        with pytest.raises(InvalidInputError):
            thomas_lower_bound(s, RiskParams(0.5))


class TestBrown:
    def test_degenerate_support(self):
        s = SortedSample.from_values([2.0] * 5, 2.0, 2.0)
        assert brown_bounds(s, RiskParams(0.3)) == (2.0, 2.0)

    def test_radius_scaling(self):
        p = RiskParams(0.3, 0.1)
        s1 = SortedSample.from_values(np.zeros(100), 0.0, 1.0)
        s4 = SortedSample.from_values(np.zeros(400), 0.0, 1.0)
        lo1, up1 = brown_bounds(s1, p)
        lo4, up4 = brown_bounds(s4, p)
        assert up4 / up1 == pytest.approx(0.5, rel=1e-12)
        assert lo4 / lo1 == pytest.approx(0.5, rel=1e-12)

    def test_contains_thomas(self):
        rng = np.random.default_rng(9)
        p = RiskParams(0.2, 0.05)
        for _ in range(20):
            s = beta_sample(rng, 1000, 2, 5)
            lo, up = brown_bounds(s, p)
            assert lo <= thomas_lower_bound(s, p) and up >= thomas_upper_bound(s, p)


class TestEcdfBounds:
    @pytest.mark.parametrize("alpha", [0.05, 0.1, 0.25, 0.7])
    def test_coincides_with_thomas(self, alpha):
        rng = np.random.default_rng(10)
        p = RiskParams(alpha, 0.05)
        for n in (20, 100, 1000):
            s = beta_sample(rng, n, 0.5, 0.5)
            lo, up = ecdf_concentration_bounds(s, p)
            assert abs(lo - thomas_lower_bound(s, p)) < 1e-10
            assert abs(up - thomas_upper_bound(s, p)) < 1e-10

    def test_collapsed_upper_returns_support(self):
        s = SortedSample.from_values([0.1, 0.2, 0.3], 0.0, 1.0)
        # eps = sqrt(ln 20 / 6) ~ 0.71 > alpha
        assert ecdf_concentration_bounds(s, RiskParams(0.5, 0.05))[1] == 1.0

    def test_converges(self):
        rng = np.random.default_rng(11)
        p = RiskParams(0.2, 0.05)
        widths = []
        for n in (100, 1000, 10000):
            lo, up = ecdf_concentration_bounds(beta_sample(rng, n), p)
            widths.append(up - lo)
        assert widths[0] > widths[1] > widths[2]


class TestAuxBounds:
    def setup_method(self):
        self.Y = DistributionOracle.truncated_normal(0.0, 1.0)
        self.cvar = lambda b: oracle_cvar(self.Y, b)
        self.mean = self.Y.mean()

    def test_zero_eps(self):
        r = aux_cvar_bounds(0.3, 0.0, (-1, 1, -1, 1), self.cvar, self.mean)
        assert r.lower == pytest.approx(r.upper, abs=1e-9)
        assert r.upper == pytest.approx(oracle_cvar(self.Y, 0.3), abs=1e-9)

    def test_collapse(self):
        r = aux_cvar_bounds(0.3, 0.3, (-1, 1, -1, 2), self.cvar, self.mean)
        assert r.upper == 2.0
        assert r.branch.upper == Branch.COLLAPSED

    def test_width_monotone(self):
        widths = [
            (lambda r: r.upper - r.lower)(aux_cvar_bounds(0.4, e, (-1, 1, -1, 1), self.cvar, self.mean))
            for e in np.linspace(0, 0.6, 13)
        ]
        assert np.all(np.diff(widths) >= -1e-12)

    def test_eps_range(self):
        with pytest.raises(InvalidInputError):
            aux_cvar_bounds(0.3, 1.5, (-1, 1, -1, 1), self.cvar, self.mean)

    def test_sample_zero_eps_is_ecdf(self):
        rng = np.random.default_rng(12)
        s = beta_sample(rng, 500)
        p = RiskParams(0.2, 0.05)
        r = aux_cvar_bounds_from_samples(s, 0.2, 0.0, 0.05)
        lo, up = ecdf_concentration_bounds(s, p)
        assert r.lower == pytest.approx(lo, abs=1e-12)
        assert r.upper == pytest.approx(up, abs=1e-12)
        assert r.eps_prime == pytest.approx(dkw_radius(500, 0.05))

    def test_sample_converges_to_exact(self):
        rng = np.random.default_rng(13)
        exact = aux_cvar_bounds(0.3, 0.05, (-1, 1, -1, 1), self.cvar, self.mean)
        gaps = []
        for n in (100, 10_000, 1_000_000):
            r = aux_cvar_bounds_from_samples(SortedSample.from_values(self.Y.sample(n, rng), -1, 1), 0.3, 0.05, 0.05)
            gaps.append(abs(r.upper - exact.upper) + abs(r.lower - exact.lower))
        assert gaps[0] > gaps[1] > gaps[2]


# -- envelopes


class TestEnvelopes:
    def test_zero_gap_identity(self):
        cdf = DiscreteCdf.from_atoms([0, 1, 2], [0.2, 0.5, 0.3])
        env = envelope_cdf_lower(cdf, GridFunction([0.0, 1.0, 2.0], [0.0, 0.0, 0.0]))
        assert np.allclose(env(cdf.xs), cdf(cdf.xs))

    def test_constant_gap_matches_aux_lower(self):
        rng = np.random.default_rng(14)
        for _ in range(20):
            locs = np.sort(rng.uniform(0, 1, 8))
            cdf = DiscreteCdf.from_atoms(locs, rng.uniform(0.1, 1, 8))
            eps, alpha = 0.07, 0.3
            env = envelope_cdf_lower(cdf, GridFunction([locs[0] - 1.0], [eps]))
            aux = aux_cvar_bounds(alpha, eps, (locs[0] - 1, 1, locs[0] - 1, 1), lambda b: cdf_cvar(cdf, b), cdf.mean())
            assert cdf_cvar(env, alpha) == pytest.approx(aux.lower, abs=1e-10)

    def test_envelope_is_cdf(self):
        cdf = DiscreteCdf.from_atoms([0, 1, 2], [0.2, 0.5, 0.3])
        env = envelope_cdf_lower(cdf, GridFunction([0.5, 1.5], [0.1, 0.4]))
        assert np.all(np.diff(env.probs) >= 0) and env.probs[-1] == 1.0 and env.probs[0] >= 0

    def test_decreasing_gap_rejected(self):
        cdf = DiscreteCdf.from_atoms([0, 1], [0.5, 0.5])
        with pytest.raises(InvalidInputError):
            envelope_cdf_lower(cdf, GridFunction([0.0, 1.0], [0.3, 0.1]))

    def test_two_normal_envelope_dominates(self):
        xs = np.linspace(-5, 5, 2001)
        fx, fy = stats.norm.pdf(xs, 0.3, 1.0), stats.norm.pdf(xs, 0.0, 1.0)
        h = GridFunction(xs, np.abs(fx - fy))
        Y = DiscreteCdf(xs, np.r_[stats.norm.cdf(xs[:-1]), 1.0])
        env = envelope_cdf_from_density_gap(Y, h)
        assert np.all(env(xs[:-1]) >= stats.norm.cdf(xs[:-1], 0.3, 1.0) - 1e-3)

    def test_ramp(self):
        xs = np.linspace(-1, 2, 301)
        h = GridFunction(xs, np.where((xs >= 0) & (xs <= 1), 0.2, 0.0))
        g = cumulative_gap(h)
        expect = np.clip(0.2 * xs, 0, 0.2)
        assert np.allclose(g.values, expect, atol=2e-3)

    def test_negative_density_gap(self):
        with pytest.raises(InvalidInputError):
            cumulative_gap(GridFunction([0.0, 1.0], [0.1, -0.1]))

    def test_lower_than_any_perturbation(self):
        rng = np.random.default_rng(15)
        xs = np.arange(6.0)
        fy = np.full(6, 1 / 6)
        h = np.full(6, 0.05)
        Y = DiscreteCdf.from_atoms(xs, fy)
        env = envelope_cdf_lower(Y, GridFunction(xs, np.cumsum(h)))
        bound = cdf_cvar(env, 0.3)
        for _ in range(200):
            d = rng.uniform(-1, 1, 6) * h
            d -= d.mean()
            fx = fy + d
            if np.any(fx < 0) or np.any(np.abs(d) > h + 1e-12):
                continue
            assert bound <= cdf_cvar(DiscreteCdf.from_atoms(xs, fx), 0.3) + 1e-12


# -- oracles


class TestOracles:
    def test_point_mass(self):
        assert oracle_cvar(DistributionOracle.point_mass(1.7), 0.3) == pytest.approx(1.7)

    def test_uniform(self):
        assert oracle_cvar(DistributionOracle.uniform(), 0.5) == pytest.approx(0.75, abs=1e-9)

    def test_truncated_normal(self):
        val = oracle_cvar(DistributionOracle.truncated_normal(0, 1), 0.2)
        assert val == pytest.approx(truncnorm_cvar(0.2), abs=1e-6)
        assert val == pytest.approx(0.7555987682689772, abs=1e-9)

    def test_truncated_normal_monte_carlo(self):
        tn = DistributionOracle.truncated_normal(0, 1)
        x = np.sort(tn.sample(10**6, np.random.default_rng(16)))
        assert np.all((x >= -1) & (x <= 1))
        assert x[-200_000:].mean() == pytest.approx(oracle_cvar(tn, 0.2), abs=3e-3)

    def test_cdf_shift_exact_ks(self):
        F = DistributionOracle.truncated_normal(0, 1)
        for eps in (0.0, 0.1, 0.3):
            G = DistributionOracle.cdf_shift(F, eps)
            xs = np.linspace(-1, 1, 1001)
            assert np.allclose(G.cdf(xs), np.minimum(F.cdf(xs) + eps, 1.0))
            assert ks_distance(F, G) == pytest.approx(eps, abs=1e-9)
