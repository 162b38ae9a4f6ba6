"""Push: a robot nudges an object toward a target while avoiding a danger zone."""

from __future__ import annotations

import numpy as np

from ..discrepancy import UniformBoxProposal
from ..pomdp_core import ORIGINAL, SIMPLIFIED, PomdpModel, check_variant
from .config import PushConfig
from .gmm import MatchedGmm, normal_logpdf

MOVES = {"up": (0.0, 1.0), "down": (0.0, -1.0), "left": (-1.0, 0.0), "right": (1.0, 0.0)}


class Push(PomdpModel):
    """State ``(rx, ry, ox, oy, tx, ty, terminal)``.

    The robot moves with small Gaussian noise. When it is within the push
    threshold of the object and moving toward it, the object is displaced along
    the move by ``(1 - friction)`` of its length, capped at the maximum force.
    Only the object position is observed. Entering the danger zone costs the
    penalty once and ends the episode.
    """

    name = "push"
    state_dim = 7
    obs_dim = 2
    action_names = tuple(MOVES)

    def __init__(self, config: PushConfig | None = None, variant: str = SIMPLIFIED):
        super().__init__(variant)
        self.config = config or PushConfig()
        c = self.config
        c.validate()
        self.moves = np.array([MOVES[a] for a in self.action_names])
        self.gmm = MatchedGmm(c.gmm_components, c.gmm_component_ratio, seed=c.gmm_seed)
        self.r_min = 0.0
        self.r_max = -c.danger_penalty
        self.discount = c.discount
        self._hi = np.asarray(c.grid_size, dtype=float)
        self._rsd = np.sqrt(np.asarray(c.robot_cov, dtype=float))
        self._noise_sd = float(np.sqrt(c.reward_noise_var))

    def cost_bounds(self, variant=None):
        if (variant or self.variant) == ORIGINAL:
            pad = 6.0 * self._noise_sd
            return self.r_min - pad, self.r_max + pad
        return self.r_min, self.r_max

    def in_danger(self, robot) -> np.ndarray:
        c = self.config
        d = np.linalg.norm(robot - np.asarray(c.danger_center), axis=-1)
        return d <= c.danger_radius + c.robot_radius

    def initial_states(self):
        return np.array([[*self.config.initial, 0.0]])

    def is_terminal(self, states):
        return np.asarray(states)[..., 6] > 0.5

    def cost(self, states, actions):
        s = np.asarray(states, dtype=float)
        hit = self.in_danger(s[..., :2]) & ~self.is_terminal(s)
        return np.where(hit, -self.config.danger_penalty, 0.0)

    def _push(self, robot, obj, step):
        c = self.config
        rel = obj - robot
        close = np.linalg.norm(rel, axis=-1) <= c.push_threshold
        toward = np.sum(rel * step, axis=-1) > 0
        disp = step * (1.0 - c.friction)
        n = np.linalg.norm(disp, axis=-1, keepdims=True)
        disp = np.where(n > c.max_push_force, disp * c.max_push_force / np.where(n > 0, n, 1.0), disp)
        return np.where((close & toward)[..., None], np.clip(obj + disp, 0.0, self._hi), obj)

    def sample_transition(self, states, actions, variant, rng):
        s = np.asarray(states, dtype=float)
        term = self.is_terminal(s)
        a = np.broadcast_to(np.asarray(actions, dtype=np.int64), term.shape)
        robot, obj = s[..., :2], s[..., 2:4]
        cost = self.cost(s, a)
        hit = cost > 0
        if check_variant(variant) == ORIGINAL:
            cost = cost + np.where(term, 0.0, self._noise_sd * rng.standard_normal(term.shape))
        step = self.moves[a] + self._rsd * rng.standard_normal(robot.shape)
        new_robot = np.clip(robot + step, 0.0, self._hi)
        new_obj = self._push(robot, obj, new_robot - robot)
        frozen = (term | hit)[..., None]
        nxt = np.concatenate(
            [np.where(frozen, robot, new_robot), np.where(frozen, obj, new_obj), s[..., 4:6], (term | hit)[..., None]],
            axis=-1,
        )
        return nxt, cost

    def obs_sample(self, next_states, actions, variant, rng):
        obj = np.asarray(next_states, dtype=float)[..., 2:4]
        sd = self.config.object_obs_sd
        if check_variant(variant) == ORIGINAL:
            return obj + self.gmm.sample(obj.shape, rng, sd)
        return obj + sd * rng.standard_normal(obj.shape)

    def _obs_log_density(self, z, next_states, actions, variant):
        obj = np.asarray(next_states, dtype=float)[..., 2:4]
        diff = np.asarray(z, dtype=float)[:, None, :] - obj
        sd = self.config.object_obs_sd
        if variant == ORIGINAL:
            return self.gmm.logpdf(diff, sd).sum(axis=-1)
        return normal_logpdf(diff, sd).sum(axis=-1)

    # -- importance sampling hooks

    def embed(self, states):
        return np.asarray(states, dtype=float)[..., :2]

    def predict_embedded(self, states, actions):
        s = np.asarray(states, dtype=float)
        term = self.is_terminal(s) | self.in_danger(s[..., :2])
        a = np.broadcast_to(np.asarray(actions, dtype=np.int64), term.shape)
        robot = s[..., :2]
        return np.where(term[..., None], robot, np.clip(robot + self.moves[a], 0.0, self._hi))

    def transition_log_density(self, next_embedded, states, actions):
        mean = self.predict_embedded(states, actions)
        d = np.asarray(next_embedded, dtype=float) - mean
        var = self._rsd**2
        return np.sum(-0.5 * d * d / var - 0.5 * np.log(2 * np.pi * var), axis=-1)

    def default_proposal(self) -> UniformBoxProposal:
        w, h = self.config.grid_size
        c = self.config
        template = [0.0, 0.0, *c.initial[2:6], 0.0]
        return UniformBoxProposal([0, 0], [w, h], template=template, embed_columns=[0, 1])
