"""2-D Light-Dark navigation with beacon-dependent position observations."""

from __future__ import annotations

import numpy as np

from ..discrepancy import UniformBoxProposal
from ..pomdp_core import ORIGINAL, SIMPLIFIED, PomdpModel, check_variant
from .config import LightDarkConfig
from .gmm import MatchedGmm, normal_logpdf

MOVES = {"up": (0.0, 1.0), "down": (0.0, -1.0), "left": (-1.0, 0.0), "right": (1.0, 0.0)}


def _gauss_logpdf(x, mean, var):
    d = x - mean
    return np.sum(-0.5 * d * d / var - 0.5 * np.log(2 * np.pi * var), axis=-1)


class LightDark(PomdpModel):
    """State ``(x, y, terminal)``. Entering the goal disk pays the goal reward once and terminates."""

    name = "light-dark"
    state_dim = 3
    obs_dim = 2
    action_names = tuple(MOVES)

    def __init__(self, config: LightDarkConfig | None = None, variant: str = SIMPLIFIED):
        super().__init__(variant)
        self.config = config or LightDarkConfig()
        c = self.config
        c.validate()
        self.moves = np.array([MOVES[a] for a in self.action_names])
        self.beacons = np.asarray(c.beacons, dtype=float)
        self.gmm = MatchedGmm(c.gmm_components, c.gmm_component_ratio, seed=c.gmm_seed)
        self.r_min = -c.reward_goal
        self.r_max = -c.reward_step - c.reward_obstacle
        self.discount = c.discount
        self._hi = np.asarray(c.grid_size, dtype=float)

    # -- geometry

    def in_goal(self, pos) -> np.ndarray:
        return np.linalg.norm(pos - np.asarray(self.config.goal), axis=-1) <= self.config.goal_radius

    def in_obstacle(self, pos) -> np.ndarray:
        return np.linalg.norm(pos - np.asarray(self.config.obstacle), axis=-1) <= self.config.obstacle_radius

    def near_beacon(self, pos) -> np.ndarray:
        d = np.linalg.norm(pos[..., None, :] - self.beacons, axis=-1)
        return np.any(d <= self.config.beacon_radius, axis=-1)

    def obs_sd(self, pos) -> np.ndarray:
        c = self.config
        return np.where(self.near_beacon(pos), np.sqrt(c.obs_cov_near), np.sqrt(c.obs_cov_far))

    # -- model

    def initial_states(self):
        return np.array([[*self.config.start, 0.0]])

    def is_terminal(self, states):
        return np.asarray(states)[..., 2] > 0.5

    def cost(self, states, actions):
        s = np.asarray(states, dtype=float)
        pos, term = s[..., :2], self.is_terminal(s)
        c = self.config
        step = -c.reward_step - c.reward_obstacle * c.obstacle_hit_prob * self.in_obstacle(pos)
        out = np.where(self.in_goal(pos), -c.reward_goal, step)
        return np.where(term, 0.0, out)

    def sample_transition(self, states, actions, variant, rng):
        s = np.asarray(states, dtype=float)
        c = self.config
        pos, term = s[..., :2], self.is_terminal(s)
        goal = self.in_goal(pos) & ~term
        a = np.broadcast_to(np.asarray(actions, dtype=np.int64), term.shape)
        hit = self.in_obstacle(pos) & (rng.random(term.shape) < c.obstacle_hit_prob)
        cost = np.where(goal, -c.reward_goal, -c.reward_step - c.reward_obstacle * hit)
        cost = np.where(term, 0.0, cost)
        noise = np.sqrt(c.transition_cov) * rng.standard_normal(pos.shape)
        moved = np.clip(pos + self.moves[a] + noise, 0.0, self._hi)
        frozen = (term | goal)[..., None]
        nxt = np.concatenate([np.where(frozen, pos, moved), (term | goal)[..., None].astype(float)], axis=-1)
        return nxt, cost

    def obs_sample(self, next_states, actions, variant, rng):
        pos = np.asarray(next_states, dtype=float)[..., :2]
        sd = self.obs_sd(pos)[..., None]
        if check_variant(variant) == ORIGINAL:
            return pos + self.gmm.sample(pos.shape, rng, sd)
        return pos + sd * rng.standard_normal(pos.shape)

    def _obs_log_density(self, z, next_states, actions, variant):
        pos = np.asarray(next_states, dtype=float)[..., :2]
        sd = self.obs_sd(pos)[..., None]
        diff = np.asarray(z, dtype=float)[:, None, :] - pos
        if variant == ORIGINAL:
            return self.gmm.logpdf(diff, sd).sum(axis=-1)
        return normal_logpdf(diff, sd).sum(axis=-1)

    # -- importance sampling hooks

    def embed(self, states):
        return np.asarray(states, dtype=float)[..., :2]

    def predict_embedded(self, states, actions):
        s = np.asarray(states, dtype=float)
        pos, term = s[..., :2], self.is_terminal(s)
        a = np.broadcast_to(np.asarray(actions, dtype=np.int64), term.shape)
        frozen = (term | self.in_goal(pos))[..., None]
        return np.where(frozen, pos, np.clip(pos + self.moves[a], 0.0, self._hi))

    def transition_log_density(self, next_embedded, states, actions):
        mean = self.predict_embedded(states, actions)
        return _gauss_logpdf(np.asarray(next_embedded, dtype=float), mean, self.config.transition_cov)

    def default_proposal(self) -> UniformBoxProposal:
        c = self.config
        return UniformBoxProposal(c.proposal_lo, c.proposal_hi, template=[0.0, 0.0, 0.0], embed_columns=[0, 1])
