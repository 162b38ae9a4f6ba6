import dataclasses

import numpy as np
import pytest

from cvar_pomdp.environments import (
    CONFIG_TYPES,
    MatchedGmm,
    ToyChain,
    ToyChainConfig,
    config_from_dict,
    enumerate_return_distribution,
    load_config,
    load_scripts,
    make_environment,
    normal_logpdf,
)
from cvar_pomdp.errors import ConfigError, InvalidInputError, SizeError
from cvar_pomdp.pomdp_core import ORIGINAL, SIMPLIFIED, OpenLoopSequence, ParticleBelief, sample_returns

NAMES = ("light-dark", "laser-tag", "push")


def _grid_mass(model, state, variant, half_width, n=241):
    """Riemann sum of the observation density over a square around the noise-free observation."""
    pos = state[0, :2] if model.name == "light-dark" else state[0, 2:4]
    g = np.linspace(-half_width, half_width, n)
    xx, yy = np.meshgrid(g, g, indexing="ij")
    z = np.stack([xx.ravel(), yy.ravel()], axis=1) + pos
    dens = np.exp(model.obs_log_density(z, state, np.array([0]), variant)[:, 0])
    return dens.sum() * (g[1] - g[0]) ** 2


class TestFactory:
    def test_unknown_name(self):
        with pytest.raises(InvalidInputError):
            make_environment("mountain-car")

    @pytest.mark.parametrize("name", NAMES)
    def test_shipped_config_matches_defaults(self, name):
        assert load_config(name) == CONFIG_TYPES[name]()

    @pytest.mark.parametrize("name", NAMES)
    def test_dict_roundtrip(self, name):
        cfg = load_config(name)
        doc = {k: (list(v) if isinstance(v, tuple) else v) for k, v in dataclasses.asdict(cfg).items()}
        assert config_from_dict(name, doc) == cfg

    def test_unknown_field(self):
        with pytest.raises(ConfigError):
            config_from_dict("push", {"gravity": 9.8})

    def test_dict_override(self):
        m = make_environment("light-dark", config={"horizon": 4})
        assert m.config.horizon == 4 and m.config.goal == (6.0, 6.0)

    def test_scripts(self):
        for name in NAMES:
            m = make_environment(name)
            scripts = load_scripts(name)
            assert set(scripts) == {"safe", "dangerous"}
            for seq in scripts.values():
                [m.action_id(a) for a in seq]


class TestGmm:
    @pytest.mark.parametrize("name", NAMES)
    def test_moments(self, name):
        g = make_environment(name).gmm
        mu, var = g.moments()
        assert mu == pytest.approx(0.0, abs=1e-12) and var == pytest.approx(1.0, abs=1e-12)
        x = g.sample(10**6, np.random.default_rng(0), 0.5)
        assert abs(x.mean()) < 0.01 * 0.5 * 5
        assert x.var() == pytest.approx(0.25, rel=0.01)

    def test_logpdf_normalized(self):
        g = MatchedGmm(300, 0.3, seed=1)
        x = np.linspace(-8, 8, 16001)
        assert np.trapezoid(np.exp(g.logpdf(x, 0.7)), x) == pytest.approx(1.0, abs=1e-6)

    def test_single_component_is_normal(self):
        x = np.linspace(-3, 3, 7)
        assert np.allclose(MatchedGmm(1, 0.5).logpdf(x, 2.0), normal_logpdf(x, 2.0))
        assert np.allclose(MatchedGmm(5, 1.0).logpdf(x, 2.0), normal_logpdf(x, 2.0))

    def test_invalid(self):
        with pytest.raises(InvalidInputError):
            MatchedGmm(0, 0.5)
        with pytest.raises(InvalidInputError):
            MatchedGmm(10, 1.5)


class TestObservationDensities:
    @pytest.mark.parametrize("variant", [SIMPLIFIED, ORIGINAL])
    def test_light_dark_normalized_near_beacon(self, variant):
        m = make_environment("light-dark")
        s = np.array([[1.4, 1.2, 0.0]])
        assert m.near_beacon(s[:, :2])[0]
        assert _grid_mass(m, s, variant, 6 * np.sqrt(0.03)) == pytest.approx(1.0, abs=1e-2)

    @pytest.mark.parametrize("variant", [SIMPLIFIED, ORIGINAL])
    def test_push_normalized(self, variant):
        m = make_environment("push")
        s = np.array([[0.5, 0.5, 1.0, 0.5, 5.0, 5.0, 0.0]])
        assert _grid_mass(m, s, variant, 0.6) == pytest.approx(1.0, abs=1e-2)

    def test_simplified_is_single_gaussian(self):
        m = make_environment("light-dark")
        s = np.array([[3.5, 3.5, 0.0], [1.0, 1.2, 0.0]])
        z = np.array([[3.7, 3.1], [0.9, 1.4]])
        sd = m.obs_sd(s[:, :2])
        want = normal_logpdf(z[:, None, :] - s[None, :, :2], sd[None, :, None]).sum(axis=-1)
        assert np.allclose(m.obs_log_density(z, s, np.array([0]), SIMPLIFIED), want)

    def test_laser_tag_terminal_point_mass(self):
        m = make_environment("laser-tag")
        s = np.array([[2.0, 1.0, 8.0, 5.0, 1.0]])
        z = m.obs_sample(s, np.array([0]), ORIGINAL, np.random.default_rng(0))
        for v in (SIMPLIFIED, ORIGINAL):
            assert m.obs_log_density(z, s, np.array([0]), v)[0, 0] == 0.0

    def test_laser_tag_ranges(self):
        m = make_environment("laser-tag")
        # opponent straight to the right at distance 3, radius 0.3
        r = m.ranges(np.array([0.5, 0.5]), np.array([3.5, 0.5]))
        assert r[0] == pytest.approx(2.7)
        assert np.all(r > 0)


class TestDynamics:
    def test_light_dark_obstacle_cost(self):
        m = make_environment("light-dark")
        s = np.array([[5.0, 2.0, 0.0], [1.0, 6.0, 0.0], [6.0, 6.0, 0.0], [5.0, 2.0, 1.0]])
        assert np.allclose(m.cost(s, np.zeros(4, dtype=int)), [12.0, 2.0, -10.0, 0.0])

    def test_laser_tag_danger_cost(self):
        m = make_environment("laser-tag")
        s = np.array([[5.0, 3.0, 9.0, 1.0, 0.0]])
        assert m.cost(s, np.array([0]))[0] == 301.0

    def test_push_danger_cost_and_termination(self):
        m = make_environment("push")
        s = np.array([[5.0, 2.0, 1.0, 0.5, 5.0, 5.0, 0.0]])
        assert m.cost(s, np.array([0]))[0] == 20.0
        nxt, c = m.sample_transition(s, np.array([0]), SIMPLIFIED, np.random.default_rng(0))
        assert c[0] == 20.0 and m.is_terminal(nxt)[0]

    def test_push_reward_noise(self):
        m = make_environment("push")
        s = np.tile([[5.0, 2.0, 1.0, 0.5, 5.0, 5.0, 0.0]], (200_000, 1))
        a = np.zeros(len(s), dtype=int)
        _, c_s = m.sample_transition(s, a, SIMPLIFIED, np.random.default_rng(1))
        _, c_o = m.sample_transition(s, a, ORIGINAL, np.random.default_rng(1))
        assert np.all(c_s == 20.0)
        assert c_o.mean() == pytest.approx(20.0, abs=4 * 5 / np.sqrt(len(s)))
        assert c_o.var() == pytest.approx(25.0, rel=0.02)
        lo, hi = m.cost_bounds(ORIGINAL)
        assert lo == -30.0 and hi == 50.0

    @pytest.mark.parametrize("name", NAMES)
    def test_states_stay_in_arena(self, name):
        m = make_environment(name)
        rng = np.random.default_rng(3)
        b = m.initial_belief(200, rng=rng)
        x = b.states
        hi = np.asarray(getattr(m.config, "grid_size", None) or m.config.arena)
        for t in range(12):
            a = rng.integers(0, len(m.action_names), size=len(x))
            x, _ = m.sample_transition(x, a, ORIGINAL, rng)
            assert np.all(x[:, :2] >= 0) and np.all(x[:, :2] <= hi)
            if name == "laser-tag":
                live = ~m.is_terminal(x)
                assert not np.any(m.in_wall(x[live, :2]))
                assert not np.any(m.in_wall(x[live, 2:4]))


class TestToyEnumeration:
    def test_deterministic_chain_single_atom(self):
        ident = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
        c = ToyChain(ToyChainConfig(transition=[ident, ident], initial=[1.0, 0.0, 0.0]))
        cdf = enumerate_return_distribution(c, OpenLoopSequence([0, 1, 0]), 0, 2, SIMPLIFIED)
        assert cdf.xs.size == 1 and cdf.xs[0] == pytest.approx(0.0 + 0.2 + 0.0)

    def test_symmetric_two_state(self):
        half = [[0.5, 0.5], [0.5, 0.5]]
        cfg = ToyChainConfig(
            transition=[half, half],
            obs_original=[[1.0, 0.0], [0.0, 1.0]],
            obs_simplified=[[1.0, 0.0], [0.0, 1.0]],
            cost=[[0.0, 0.0], [1.0, 1.0]],
            initial=[1.0, 0.0],
        )
        c = ToyChain(cfg)
        b = ParticleBelief(np.array([[0.0]]), [1.0])
        cdf = enumerate_return_distribution(c, OpenLoopSequence([0, 0]), 0, 1, SIMPLIFIED, belief=b)
        assert np.allclose(cdf.xs, [0.0, 1.0]) and np.allclose(cdf.masses, [0.5, 0.5])

    @pytest.mark.parametrize("variant", [SIMPLIFIED, ORIGINAL])
    def test_mean_matches_monte_carlo(self, variant):
        c = ToyChain()
        pol = OpenLoopSequence([1, 0, 1])
        cdf = enumerate_return_distribution(c, pol, 1, 2, variant)
        mean = float(np.sum(cdf.xs * cdf.masses))
        s = sample_returns(c.initial_belief(), 1, pol, 2, 10**6, c, variant, rng=5)
        assert abs(s.mean() - mean) <= 4 * s.values.std() / 1e3

    def test_size_error(self):
        with pytest.raises(SizeError):
            enumerate_return_distribution(ToyChain(), OpenLoopSequence([0] * 9), 0, 8)

    def test_invalid_tables(self):
        with pytest.raises(InvalidInputError):
            ToyChain(ToyChainConfig(initial=[0.5, 0.5, 0.5]))
        with pytest.raises(InvalidInputError):
            ToyChain(ToyChainConfig(obs_original=[[0.9, 0.2], [0.5, 0.5], [0.1, 0.9]]))
        with pytest.raises(InvalidInputError):
            ToyChain(ToyChainConfig(cost=[[0.0], [1.0], [2.0]]))
