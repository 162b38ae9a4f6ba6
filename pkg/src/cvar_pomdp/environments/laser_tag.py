"""Continuous Laser Tag: a robot with 8 noisy range sensors chases a pursuing opponent."""

from __future__ import annotations

import numpy as np

from ..discrepancy import UniformBoxProposal
from ..pomdp_core import ORIGINAL, SIMPLIFIED, PomdpModel, check_variant
from .config import LaserTagConfig
from .gmm import MatchedGmm, normal_logpdf

MOVES = {"up": (0.0, 1.0), "down": (0.0, -1.0), "left": (-1.0, 0.0), "right": (1.0, 0.0), "tag": (0.0, 0.0)}
TAG = 4
TERMINAL_OBS = -1.0


def _gauss_logpdf(x, mean, var):
    d = x - mean
    return np.sum(-0.5 * d * d / var - 0.5 * np.log(2 * np.pi * var), axis=-1)


class LaserTag(PomdpModel):
    """State ``(rx, ry, ox, oy, terminal)``; a successful tag terminates the episode.

    Terminal states emit the observation vector of all ``-1``.
    """

    name = "laser-tag"
    state_dim = 5
    action_names = tuple(MOVES)

    def __init__(self, config: LaserTagConfig | None = None, variant: str = SIMPLIFIED):
        super().__init__(variant)
        self.config = config or LaserTagConfig()
        c = self.config
        c.validate()
        self.obs_dim = c.n_rays
        self.moves = np.array([MOVES[a] for a in self.action_names])
        ang = 2 * np.pi * np.arange(c.n_rays) / c.n_rays
        self.rays = np.stack([np.cos(ang), np.sin(ang)], axis=1)
        self.rays[np.abs(self.rays) < 1e-12] = 0.0
        self.walls = np.asarray(c.walls, dtype=float)
        self.dangers = np.asarray(c.danger_centers, dtype=float)
        self._hi = np.asarray(c.arena, dtype=float)
        self.gmm = MatchedGmm(c.gmm_components, c.gmm_component_ratio, seed=c.gmm_seed)
        self.r_min = -c.reward_step - c.reward_tag
        self.r_max = -c.reward_step - c.danger_penalty - c.reward_failed_tag
        self.discount = c.discount
        self._noise_sd = float(np.sqrt(c.reward_noise_var))

    def cost_bounds(self, variant=None):
        if (variant or self.variant) == ORIGINAL:
            pad = 6.0 * self._noise_sd
            return self.r_min - pad, self.r_max + pad
        return self.r_min, self.r_max

    # -- geometry

    def in_wall(self, pos) -> np.ndarray:
        lo = self.walls
        p = pos[..., None, :]
        return np.any(np.all((p >= lo) & (p <= lo + 1.0), axis=-1), axis=-1)

    def in_danger(self, pos) -> np.ndarray:
        d = np.linalg.norm(pos[..., None, :] - self.dangers, axis=-1)
        return np.any(d <= self.config.danger_radius, axis=-1)

    def tagged(self, states) -> np.ndarray:
        s = np.asarray(states, dtype=float)
        return np.linalg.norm(s[..., :2] - s[..., 2:4], axis=-1) <= self.config.tag_radius

    def ranges(self, robot, opponent) -> np.ndarray:
        """Noise-free range along each ray to the nearest boundary, wall cell or the opponent disk."""
        robot = np.asarray(robot, dtype=float)
        p = robot[..., None, :]
        u = self.rays
        with np.errstate(divide="ignore", invalid="ignore"):
            inv = np.where(u != 0, 1.0 / np.where(u != 0, u, 1.0), np.inf)
            tb = np.where(u > 0, (self._hi - p) * inv, np.where(u < 0, -p * inv, np.inf))
            best = tb.min(axis=-1)
            # slab test against every wall cell at once: (..., ray, wall, axis)
            pw = robot[..., None, None, :]
            par = (u == 0)[:, None, :]
            iw = inv[:, None, :]
            t1 = (self.walls - pw) * iw
            t2 = (self.walls + 1.0 - pw) * iw
            inside = (pw >= self.walls) & (pw <= self.walls + 1.0)
            # rays parallel to a slab: no constraint if between its faces, otherwise a miss
            t1 = np.where(par, np.where(inside, -np.inf, np.inf), t1)
            t2 = np.where(par, np.inf, t2)
            tmin = np.minimum(t1, t2).max(axis=-1)
            tmax = np.maximum(t1, t2).min(axis=-1)
            entry = np.maximum(tmin, 0.0)
            hit = tmax >= entry
            best = np.minimum(best, np.where(hit, entry, np.inf).min(axis=-1))
            rel = p - opponent[..., None, :]
            b = np.sum(rel * u, axis=-1)
            cc = np.sum(rel * rel, axis=-1) - self.config.opponent_radius**2
            disc = b * b - cc
            t_op = np.where(cc <= 0, 0.0, -b - np.sqrt(np.maximum(disc, 0.0)))
            hit_op = (disc >= 0) & (t_op >= 0)
            best = np.where(hit_op, np.minimum(best, t_op), best)
        return best

    # -- model

    def initial_states(self):
        return np.array([self.config.initial], dtype=float)

    def is_terminal(self, states):
        return np.asarray(states)[..., 4] > 0.5

    def cost(self, states, actions):
        s = np.asarray(states, dtype=float)
        c = self.config
        term = self.is_terminal(s)
        a = np.broadcast_to(np.asarray(actions, dtype=np.int64), term.shape)
        out = -c.reward_step - c.danger_penalty * self.in_danger(s[..., :2])
        tag_cost = np.where(self.tagged(s), -c.reward_tag, -c.reward_failed_tag)
        out = out + np.where(a == TAG, tag_cost, 0.0)
        return np.where(term, 0.0, out)

    def _opponent_step(self, robot, opp):
        d = robot - opp
        dist = np.linalg.norm(d, axis=-1, keepdims=True)
        step = np.minimum(self.config.pursuit_speed, dist)
        return opp + np.where(dist > 0, d / np.where(dist > 0, dist, 1.0), 0.0) * step

    def _move(self, old, target):
        target = np.clip(target, 0.0, self._hi)
        return np.where(self.in_wall(target)[..., None], old, target)

    def sample_transition(self, states, actions, variant, rng):
        s = np.asarray(states, dtype=float)
        c = self.config
        term = self.is_terminal(s)
        a = np.broadcast_to(np.asarray(actions, dtype=np.int64), term.shape)
        robot, opp = s[..., :2], s[..., 2:4]
        cost = self.cost(s, a)
        if check_variant(variant) == ORIGINAL:
            cost = cost + np.where(term, 0.0, self._noise_sd * rng.standard_normal(term.shape))
        is_tag = a == TAG
        r_noise = np.sqrt(c.robot_cov) * rng.standard_normal(robot.shape)
        new_robot = np.where(is_tag[..., None], robot, self._move(robot, robot + self.moves[a] + r_noise))
        o_noise = np.sqrt(c.opponent_cov) * rng.standard_normal(opp.shape)
        new_opp = self._move(opp, self._opponent_step(robot, opp) + o_noise)
        new_term = term | (is_tag & self.tagged(s))
        keep = term[..., None]
        nxt = np.concatenate(
            [np.where(keep, robot, new_robot), np.where(keep, opp, new_opp), new_term[..., None].astype(float)], axis=-1
        )
        return nxt, cost

    def obs_sample(self, next_states, actions, variant, rng):
        s = np.asarray(next_states, dtype=float)
        clean = self.ranges(s[..., :2], s[..., 2:4])
        sd = self.config.laser_noise_sd
        if check_variant(variant) == ORIGINAL:
            noise = self.gmm.sample(clean.shape, rng, sd)
        else:
            noise = sd * rng.standard_normal(clean.shape)
        return np.where(self.is_terminal(s)[..., None], TERMINAL_OBS, clean + noise)

    def _obs_log_density(self, z, next_states, actions, variant):
        s = np.asarray(next_states, dtype=float)
        z = np.asarray(z, dtype=float)[:, None, :]
        clean = self.ranges(s[..., :2], s[..., 2:4])
        sd = self.config.laser_noise_sd
        diff = z - clean
        if variant == ORIGINAL:
            ll = self.gmm.logpdf(diff, sd).sum(axis=-1)
        else:
            ll = normal_logpdf(diff, sd).sum(axis=-1)
        z_term = np.all(z == TERMINAL_OBS, axis=-1)
        term = self.is_terminal(s)
        # terminal observation is a point mass: density 1 on terminal states, 0 elsewhere
        return np.where(term, np.where(z_term, 0.0, -np.inf), np.where(z_term, -np.inf, ll))

    # -- importance sampling hooks

    def embed(self, states):
        return np.asarray(states, dtype=float)[..., :4]

    def predict_embedded(self, states, actions):
        s = np.asarray(states, dtype=float)
        term = self.is_terminal(s)
        a = np.broadcast_to(np.asarray(actions, dtype=np.int64), term.shape)
        robot, opp = s[..., :2], s[..., 2:4]
        r = np.clip(robot + self.moves[a], 0.0, self._hi)
        o = np.clip(self._opponent_step(robot, opp), 0.0, self._hi)
        out = np.concatenate([r, o], axis=-1)
        return np.where(term[..., None], s[..., :4], out)

    def transition_log_density(self, next_embedded, states, actions):
        mean = self.predict_embedded(states, actions)
        e = np.asarray(next_embedded, dtype=float)
        c = self.config
        return _gauss_logpdf(e[..., :2], mean[..., :2], c.robot_cov) + _gauss_logpdf(e[..., 2:], mean[..., 2:], c.opponent_cov)

    def default_proposal(self) -> UniformBoxProposal:
        w, h = self.config.arena
        return UniformBoxProposal([0, 0, 0, 0], [w, h, w, h], template=[0.0] * 5, embed_columns=[0, 1, 2, 3])
