"""Small tabular POMDP with exact enumeration of the particle-belief return distribution."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from ..cvar_core import DiscreteCdf
from ..discrepancy import DiscrepancyTable
from ..errors import InvalidInputError, SizeError
from ..pomdp_core import ORIGINAL, SIMPLIFIED, ParticleBelief, Policy, PomdpModel, check_variant

MAX_PATHS = 10**6


@dataclass(frozen=True)
class ToyChainConfig:
    transition: list = field(
        default_factory=lambda: [
            [[0.8, 0.2, 0.0], [0.1, 0.8, 0.1], [0.0, 0.2, 0.8]],
            [[0.2, 0.8, 0.0], [0.0, 0.2, 0.8], [0.0, 0.0, 1.0]],
        ]
    )
    obs_original: list = field(default_factory=lambda: [[0.9, 0.1], [0.5, 0.5], [0.1, 0.9]])
    obs_simplified: list = field(default_factory=lambda: [[0.88, 0.12], [0.47, 0.53], [0.13, 0.87]])
    cost: list = field(default_factory=lambda: [[0.0, 0.2], [1.0, 1.2], [5.0, 5.2]])
    initial: list = field(default_factory=lambda: [0.6, 0.3, 0.1])
    horizon: int = 2
    discount: float = 1.0


def _check_stochastic(arr: np.ndarray, name: str) -> None:
    if np.any(arr < 0) or not np.allclose(arr.sum(axis=-1), 1.0, atol=1e-12):
        raise InvalidInputError(f"rows of {name} must be probability vectors")


class ToyChain(PomdpModel):
    """Tabular chain: states, actions and observations are small integer sets.

    States are stored as one-column float arrays holding the state index. The
    default belief has one particle per state weighted by the initial
    distribution, so the particle filter tracks the exact posterior when the
    transition is deterministic.
    """

    name = "toy-chain"
    state_dim = 1
    obs_dim = 1

    def __init__(self, config: ToyChainConfig | None = None, variant: str = SIMPLIFIED):
        super().__init__(variant)
        self.config = config or ToyChainConfig()
        c = self.config
        self.T = np.asarray(c.transition, dtype=float)
        self.O = {ORIGINAL: np.asarray(c.obs_original, dtype=float), SIMPLIFIED: np.asarray(c.obs_simplified, dtype=float)}
        self.C = np.asarray(c.cost, dtype=float)
        self.p0 = np.asarray(c.initial, dtype=float)
        nA, nS, _ = self.T.shape
        nZ = self.O[ORIGINAL].shape[1]
        if nS > 3 or nA > 2 or nZ > 2:
            raise InvalidInputError("toy chain is limited to 3 states, 2 actions, 2 observations")
        if self.T.shape != (nA, nS, nS) or self.C.shape != (nS, nA) or self.p0.shape != (nS,):
            raise InvalidInputError("toy chain tables have inconsistent shapes")
        for o in self.O.values():
            if o.shape != (nS, nZ):
                raise InvalidInputError("observation tables must be n_states x n_obs")
            _check_stochastic(o, "observation table")
        _check_stochastic(self.T, "transition table")
        _check_stochastic(self.p0, "initial distribution")
        self.n_states, self.n_actions, self.n_obs = nS, nA, nZ
        self.action_names = tuple(f"a{i}" for i in range(nA))
        self.r_min, self.r_max = float(self.C.min()), float(self.C.max())
        self.discount = float(c.discount)
        self.horizon = int(c.horizon)

    # -- PomdpModel

    @staticmethod
    def _idx(states) -> np.ndarray:
        return np.asarray(states)[..., 0].astype(np.int64)

    def initial_states(self) -> np.ndarray:
        return np.arange(self.n_states, dtype=float)[:, None]

    def initial_belief(self, n_particles=None, rng=None) -> ParticleBelief:
        if n_particles not in (None, self.n_states):
            raise InvalidInputError("toy chain beliefs use one particle per state")
        return ParticleBelief(self.initial_states(), self.p0)

    def sample_transition(self, states, actions, variant, rng):
        x = self._idx(states)
        a = np.broadcast_to(np.asarray(actions, dtype=np.int64), x.shape)
        cum = np.cumsum(self.T[a, x], axis=-1)
        u = rng.random(x.shape)
        nxt = np.minimum((cum < u[..., None]).sum(axis=-1), self.n_states - 1)
        return nxt[..., None].astype(float), self.C[x, a]

    def obs_sample(self, next_states, actions, variant, rng):
        x = self._idx(next_states)
        cum = np.cumsum(self.O[check_variant(variant)][x], axis=-1)
        u = rng.random(x.shape)
        z = np.minimum((cum < u[..., None]).sum(axis=-1), self.n_obs - 1)
        return z[..., None].astype(float)

    def _obs_log_density(self, z, next_states, actions, variant):
        x = self._idx(next_states)
        zi = np.asarray(z)[..., 0].astype(np.int64)
        zi = zi.reshape(zi.shape + (1,) * (x.ndim - zi.ndim))
        with np.errstate(divide="ignore"):
            return np.log(self.O[variant][x, zi])

    def cost(self, states, actions):
        x = self._idx(states)
        a = np.broadcast_to(np.asarray(actions, dtype=np.int64), x.shape)
        return self.C[x, a]

    def transition_log_density(self, next_embedded, states, actions):
        xn = self._idx(next_embedded)
        x = self._idx(states)
        a = np.asarray(actions, dtype=np.int64)
        x, a, xn = np.broadcast_arrays(x, a, xn)
        with np.errstate(divide="ignore"):
            return np.log(self.T[a, x, xn])

    # -- exact quantities

    def tv(self) -> np.ndarray:
        """Exact ``int |p - q|`` per state (range [0, 2])."""
        return np.abs(self.O[ORIGINAL] - self.O[SIMPLIFIED]).sum(axis=1)

    def exact_table(self) -> DiscrepancyTable:
        """Table holding every state with uniform proposal and exact TV values."""
        states = self.initial_states()
        log_q0 = np.full(self.n_states, -np.log(self.n_states))
        return DiscrepancyTable(states, states, log_q0, self.tv(), n_z=0, metadata={"model": self.name, "exact": True})

    def m_exact(self, states, action) -> np.ndarray:
        x = self._idx(states)
        return self.T[action, x] @ self.tv()


@dataclass
class _Node:
    prob: float
    states: np.ndarray
    log_w: np.ndarray
    ret: float
    eps: float


def _enumerate(chain: ToyChain, policy: Policy, first_action, horizon, variant, update_variant, belief, discount):
    variant = check_variant(variant)
    update_variant = check_variant(update_variant or variant)
    b0 = belief if belief is not None else chain.initial_belief()
    gamma = chain.discount if discount is None else discount
    nodes = [_Node(1.0, chain._idx(b0.states), b0.log_weights(), 0.0, 0.0)]
    tv = chain.tv()
    for t in range(horizon + 1):
        out = []
        for nd in nodes:
            w = np.exp(nd.log_w - nd.log_w.max())
            w /= w.sum()
            if t == 0 and first_action is not None:
                a = chain.action_id(first_action)
            else:
                a = int(policy.act(ParticleBelief(nd.states[:, None].astype(float), w), t))
            rho = float(w @ chain.C[nd.states, a])
            ret = nd.ret + gamma**t * rho
            if t == horizon:
                out.append(_Node(nd.prob, nd.states, nd.log_w, ret, nd.eps))
                continue
            rows = chain.T[a, nd.states]
            m = float(w @ (rows @ tv))
            # representative particle -> observation distribution
            pz = (w @ rows) @ chain.O[variant]
            choices = [np.flatnonzero(r > 0) for r in rows]
            for combo in itertools.product(*choices):
                combo = np.asarray(combo)
                pc = float(np.prod(rows[np.arange(len(combo)), combo]))
                for z in range(chain.n_obs):
                    if pz[z] <= 0:
                        continue
                    with np.errstate(divide="ignore"):
                        lw = nd.log_w + np.log(chain.O[update_variant][combo, z])
                    if not np.any(np.isfinite(lw)):
                        continue
                    out.append(_Node(nd.prob * pc * pz[z], combo, lw, ret, nd.eps + m))
        if len(out) > MAX_PATHS:
            raise SizeError(f"enumeration exceeds {MAX_PATHS} outcome paths")
        nodes = out
    return nodes


def enumerate_return_distribution(
    chain: ToyChain,
    policy: Policy,
    first_action,
    horizon: int,
    variant: str = ORIGINAL,
    update_variant: str | None = None,
    belief: ParticleBelief | None = None,
    discount: float | None = None,
) -> DiscreteCdf:
    """Exact CDF of the particle-belief return by exhaustive expansion.

    Every joint particle transition and every observation of the representative
    particle is expanded, so the result is the law of the sampled returns of
    :func:`~cvar_pomdp.pomdp_core.sample_returns` for the same inputs.
    Observations are generated under ``variant`` and the weights updated with
    ``update_variant`` (defaults to ``variant``).
    """
    _check_budget(chain, horizon, belief)
    nodes = _enumerate(chain, policy, first_action, horizon, variant, update_variant, belief, discount)
    # merge atoms that differ only by floating-point summation order
    locs = np.round([n.ret for n in nodes], 10)
    return DiscreteCdf.from_atoms(locs, [n.prob for n in nodes])


def enumerate_epsilon(
    chain: ToyChain,
    policy: Policy,
    first_action,
    horizon: int,
    belief: ParticleBelief | None = None,
) -> float:
    """Exact ``min(1, E_s[sum_t m(b_t, a_t)])`` under the simplified particle-belief process."""
    _check_budget(chain, horizon, belief)
    nodes = _enumerate(chain, policy, first_action, horizon, SIMPLIFIED, None, belief, 1.0)
    return float(min(1.0, sum(n.prob * n.eps for n in nodes)))


def _check_budget(chain: ToyChain, horizon: int, belief) -> None:
    n_p = chain.n_states if belief is None else belief.n_particles
    per_step = (chain.n_states**n_p) * chain.n_obs
    if horizon < 0:
        raise InvalidInputError("horizon must be >= 0")
    if float(per_step) ** horizon > MAX_PATHS:
        raise SizeError(f"up to {per_step}^{horizon} outcome paths exceeds the budget of {MAX_PATHS}")
