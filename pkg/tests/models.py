"""Small analytic models shared by the unit tests."""

import numpy as np
from scipy import stats

from cvar_pomdp.discrepancy import Proposal
from cvar_pomdp.pomdp_core import ORIGINAL, PomdpModel


class NormalPair(PomdpModel):
    """1-D state observed with unit-variance Normal noise; the simplified sensor is biased by ``shift``."""

    name = "normal-pair"
    action_names = ("stay",)

    def __init__(self, shift=0.5, variant="simplified"):
        super().__init__(variant)
        self.shift = float(shift)

    def _mean(self, x, variant):
        return x[..., 0] + (0.0 if variant == ORIGINAL else self.shift)

    def sample_transition(self, states, actions, variant, rng):
        s = np.asarray(states, dtype=float)
        return s.copy(), np.zeros(s.shape[:-1])

    def obs_sample(self, next_states, actions, variant, rng):
        m = self._mean(np.asarray(next_states, dtype=float), variant)
        return (m + rng.normal(size=m.shape))[..., None]

    def _obs_log_density(self, z, next_states, actions, variant):
        m = self._mean(np.asarray(next_states, dtype=float), variant)
        z = np.asarray(z, dtype=float)[..., 0]
        z = z.reshape(z.shape + (1,) * (m.ndim - z.ndim))
        return stats.norm.logpdf(z, m)

    def cost(self, states, actions):
        return np.zeros(np.shape(states)[:-1])

    def initial_states(self):
        return np.zeros((1, 1))

    def tv(self):
        return 2.0 * (2.0 * stats.norm.cdf(abs(self.shift) / 2.0) - 1.0)


class DisjointPair(NormalPair):
    """Uniform sensors on [x, x+1] (original) and [x+2, x+3] (simplified)."""

    name = "disjoint-pair"

    def _lo(self, x, variant):
        return x[..., 0] + (0.0 if variant == ORIGINAL else 2.0)

    def obs_sample(self, next_states, actions, variant, rng):
        lo = self._lo(np.asarray(next_states, dtype=float), variant)
        return (lo + rng.random(lo.shape))[..., None]

    def _obs_log_density(self, z, next_states, actions, variant):
        lo = self._lo(np.asarray(next_states, dtype=float), variant)
        z = np.asarray(z, dtype=float)[..., 0]
        z = z.reshape(z.shape + (1,) * (lo.ndim - z.ndim))
        inside = (z >= lo) & (z <= lo + 1.0)
        return np.where(inside, 0.0, -np.inf)


class BrokenSensor(NormalPair):
    """Emits observations that neither density supports, to exercise the table-quality check."""

    name = "broken-sensor"

    def obs_sample(self, next_states, actions, variant, rng):
        s = np.asarray(next_states, dtype=float)
        return np.full(s.shape[:-1] + (1,), np.nan)

    def _obs_log_density(self, z, next_states, actions, variant):
        s = np.asarray(next_states, dtype=float)
        return np.full(np.broadcast_shapes(np.shape(z)[:-1], s.shape[:-1]), -np.inf)


class GridChain(NormalPair):
    """Random walk on ``{0..G-1}`` with a position-dependent sensor bias ``shift * x / (G-1)``."""

    name = "grid-chain"
    action_names = ("drift",)

    def __init__(self, size=40, shift=1.0, variant="simplified"):
        super().__init__(shift, variant)
        self.size = size
        P = np.zeros((size, size))
        for x in range(size):
            for dx, p in ((1, 0.7), (0, 0.2), (-1, 0.1)):
                P[x, min(max(x + dx, 0), size - 1)] += p
        self.P = P

    def _mean(self, x, variant):
        bias = 0.0 if variant == ORIGINAL else self.shift * x[..., 0] / (self.size - 1)
        return x[..., 0] + bias

    def transition_log_density(self, next_embedded, states, actions):
        xn = np.asarray(next_embedded)[..., 0].astype(int)
        x = np.asarray(states)[..., 0].astype(int)
        x, xn = np.broadcast_arrays(x, xn)
        with np.errstate(divide="ignore"):
            return np.log(self.P[x, xn])

    def tv_at(self, x):
        s = self.shift * np.asarray(x, dtype=float) / (self.size - 1)
        return 2.0 * (2.0 * stats.norm.cdf(s / 2.0) - 1.0)

    def m_exact(self, x):
        return float(self.P[x] @ self.tv_at(np.arange(self.size)))


class RandomGridProposal(Proposal):
    """I.i.d. uniform draws over a finite grid of 1-D states."""

    def __init__(self, size):
        self.size = size

    def sample(self, n, rng):
        return rng.integers(0, self.size, size=n).astype(float)[:, None]

    def log_density(self, embedded):
        return np.full(np.shape(embedded)[:-1], -np.log(self.size))


class PointProposal(Proposal):
    """Every draw is the same state."""

    def __init__(self, x=0.0):
        self.x = float(x)

    def sample(self, n, rng):
        return np.full((n, 1), self.x)

    def log_density(self, embedded):
        return np.zeros(np.shape(embedded)[:-1])
