"""Particle-belief MDP engine: model interface, GENPF step, trajectories and CVaR estimators.

The engine is vectorized over trajectories. A batch of beliefs is stored as
``states`` with shape ``(B, Np, d)`` and unnormalized log-weights ``(B, Np)``.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .cvar_core import SortedSample, empirical_cvar
from .errors import DegenerateBeliefError, InvalidInputError

ORIGINAL = "original"
SIMPLIFIED = "simplified"
VARIANTS = (ORIGINAL, SIMPLIFIED)


def check_variant(variant: str) -> str:
    if variant not in VARIANTS:
        raise InvalidInputError(f"variant must be one of {VARIANTS}, got {variant!r}")
    return variant


def as_generator(rng=None) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


# ---------------------------------------------------------------- model interface


class PomdpModel(ABC):
    """POMDP with an original and a simplified observation model.

    All sampling/density methods broadcast over leading batch dimensions.
    Costs are negated rewards, so larger is worse.
    """

    name: str = "model"
    state_dim: int = 1
    obs_dim: int = 1
    action_names: tuple[str, ...] = ()
    r_min: float = 0.0
    r_max: float = 1.0
    discount: float = 1.0

    def __init__(self, variant: str = SIMPLIFIED):
        self.variant = check_variant(variant)
        self.density_calls: Counter = Counter()

    # -- required capabilities

    @abstractmethod
    def sample_transition(self, states, actions, variant, rng) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(next_states, sampled_costs)``."""

    @abstractmethod
    def obs_sample(self, next_states, actions, variant, rng) -> np.ndarray: ...

    @abstractmethod
    def _obs_log_density(self, z, next_states, actions, variant) -> np.ndarray: ...

    @abstractmethod
    def cost(self, states, actions) -> np.ndarray:
        """Deterministic stage cost ``c(x, a)``; zero for terminal states."""

    @abstractmethod
    def initial_states(self) -> np.ndarray:
        """Support of the initial belief, shape ``(m, d)``."""

    # -- optional capabilities with defaults

    def is_terminal(self, states) -> np.ndarray:
        return np.zeros(np.shape(states)[:-1], dtype=bool)

    def embed(self, states) -> np.ndarray:
        """Coordinates used for nearest-neighbour lookups and proposal densities."""
        return np.asarray(states, dtype=float)

    def predict_embedded(self, states, actions) -> np.ndarray:
        """Most likely embedded next state; centre of the neighbour search."""
        return self.embed(states)

    def transition_log_density(self, next_embedded, states, actions) -> np.ndarray:
        """Log density of the embedded next state given ``(state, action)``."""
        raise NotImplementedError(f"{self.name} does not expose a transition density")

    def action_set(self, belief=None) -> list[int]:
        return list(range(len(self.action_names)))

    def cost_bounds(self, variant: str | None = None) -> tuple[float, float]:
        """Bounds on sampled stage costs under ``variant``."""
        return self.r_min, self.r_max

    def action_id(self, action) -> int:
        if isinstance(action, (int, np.integer)):
            if not 0 <= int(action) < len(self.action_names):
                raise InvalidInputError(f"unknown action {action}")
            return int(action)
        try:
            return self.action_names.index(action)
        except ValueError:
            raise InvalidInputError(f"unknown action {action!r} for {self.name}") from None

    # -- wrappers

    def obs_log_density(self, z, next_states, actions, variant) -> np.ndarray:
        variant = check_variant(variant)
        self.density_calls[variant] += 1
        return self._obs_log_density(z, next_states, actions, variant)

    def obs_density(self, z, next_states, actions, variant) -> np.ndarray:
        return np.exp(self.obs_log_density(z, next_states, actions, variant))

    def initial_belief(self, n_particles: int | None = None, rng=None) -> "ParticleBelief":
        """Uniform belief over :meth:`initial_states`, tiled/subsampled to ``n_particles``."""
        base = self.initial_states()
        if n_particles is None or n_particles == base.shape[0]:
            states = base
        else:
            idx = np.arange(n_particles) % base.shape[0]
            states = base[idx]
        return ParticleBelief(states, np.ones(states.shape[0]))

    def reset_counters(self) -> None:
        self.density_calls.clear()


# ---------------------------------------------------------------- beliefs and policies


@dataclass(frozen=True, eq=False)
class ParticleBelief:
    """Weighted particle set; at least one weight must be positive."""

    states: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        s = np.array(self.states, dtype=float)
        if s.ndim == 1:
            s = s[:, None]
        w = np.array(self.weights, dtype=float).ravel()
        if s.shape[0] != w.size or w.size == 0:
            raise InvalidInputError("particles and weights must be nonempty and aligned")
        if np.any(w < 0) or not np.any(w > 0) or not np.all(np.isfinite(w)):
            raise InvalidInputError("weights must be finite, nonnegative, and not all zero")
        s.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "states", s)
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_log_weights(cls, states, log_weights) -> "ParticleBelief":
        lw = np.asarray(log_weights, dtype=float)
        if not np.any(np.isfinite(lw)):
            raise DegenerateBeliefError("all particle weights are zero")
        return cls(states, np.exp(lw - lw.max()))

    @property
    def n_particles(self) -> int:
        return int(self.weights.size)

    def normalized_weights(self) -> np.ndarray:
        return self.weights / self.weights.sum()

    def log_weights(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(self.weights)

    def expected_cost(self, model: PomdpModel, action) -> float:
        a = model.action_id(action)
        return float(self.normalized_weights() @ model.cost(self.states, np.full(self.n_particles, a)))


class Policy(ABC):
    """Maps a belief and a time index (relative to the planning start) to an action id."""

    @abstractmethod
    def act(self, belief: ParticleBelief, t: int) -> int: ...

    def act_batch(self, states: np.ndarray, log_weights: np.ndarray, t: int) -> np.ndarray:
        out = np.empty(states.shape[0], dtype=np.int64)
        for i in range(states.shape[0]):
            out[i] = self.act(ParticleBelief.from_log_weights(states[i], log_weights[i]), t)
        return out


class OpenLoopSequence(Policy):
    """Fixed action script; ``act(b, t)`` returns the ``t``-th action regardless of ``b``."""

    def __init__(self, actions: Sequence[int]):
        if len(actions) == 0:
            raise InvalidInputError("action sequence must be nonempty")
        self.actions = tuple(int(a) for a in actions)

    def act(self, belief, t: int) -> int:
        if not 0 <= t < len(self.actions):
            raise InvalidInputError(f"open-loop script of length {len(self.actions)} has no step {t}")
        return self.actions[t]

    def act_batch(self, states, log_weights, t: int) -> np.ndarray:
        return np.full(states.shape[0], self.act(None, t), dtype=np.int64)

    def __len__(self) -> int:
        return len(self.actions)


class ConstantPolicy(Policy):
    def __init__(self, action: int):
        self.action = int(action)

    def act(self, belief, t: int) -> int:
        return self.action

    def act_batch(self, states, log_weights, t: int) -> np.ndarray:
        return np.full(states.shape[0], self.action, dtype=np.int64)


# ---------------------------------------------------------------- GENPF


def _normalize_log(lw: np.ndarray) -> np.ndarray:
    m = np.max(lw, axis=-1, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    w = np.exp(lw - m)
    return w / w.sum(axis=-1, keepdims=True)


def _genpf_batch(states, log_w, actions, model: PomdpModel, variant, update_variant, rng):
    """One GENPF step for every row of the batch. Returns next states, log-weights, rho, degenerate mask."""
    B, Np = log_w.shape
    w = _normalize_log(log_w)
    u = rng.random(B)
    idx = np.minimum((np.cumsum(w, axis=1) < u[:, None]).sum(axis=1), Np - 1)
    x0 = states[np.arange(B), idx]
    x0_next, _ = model.sample_transition(x0, actions, variant, rng)
    z = model.obs_sample(x0_next, actions, variant, rng)
    acts = np.broadcast_to(actions[:, None], (B, Np))
    nxt, r = model.sample_transition(states, acts, variant, rng)
    ll = model.obs_log_density(z, nxt, actions, update_variant)
    new = log_w + ll
    rho = np.sum(w * r, axis=1)
    degenerate = ~np.any(np.isfinite(new) & (new > -np.inf), axis=1)
    peak = np.max(new, axis=1, keepdims=True)
    new = new - np.where(np.isfinite(peak), peak, 0.0)
    return nxt, new, rho, degenerate


def genpf(
    belief: ParticleBelief,
    action,
    model: PomdpModel,
    variant: str | None = None,
    rng=None,
    update_variant: str | None = None,
) -> tuple[ParticleBelief, float]:
    """Particle-belief generative step: one observation from a representative particle.

    ``update_variant`` selects the observation density used for reweighting; it
    defaults to ``variant`` (the model that generates the observation).
    """
    variant = check_variant(variant or model.variant)
    update_variant = check_variant(update_variant or variant)
    rng = as_generator(rng)
    a = np.array([model.action_id(action)])
    nxt, lw, rho, bad = _genpf_batch(belief.states[None], belief.log_weights()[None], a, model, variant, update_variant, rng)
    if bad[0]:
        raise DegenerateBeliefError("all posterior weights vanished", trajectory=0, step=0)
    return ParticleBelief(nxt[0], np.exp(lw[0])), float(rho[0])


@dataclass(eq=False)
class BeliefTrajectoryBatch:
    """``N_b`` particle-belief trajectories of ``horizon + 1`` beliefs each.

    ``actions[i, t]`` is the action taken at belief ``t`` and ``costs[i, t]`` the
    matching stage cost (belief-averaged transition cost for ``t < horizon``,
    expected state cost at the final belief).
    """

    states: np.ndarray
    log_weights: np.ndarray
    actions: np.ndarray
    costs: np.ndarray
    variant: str
    update_variant: str
    retries: int = 0

    @property
    def n_traj(self) -> int:
        return int(self.states.shape[0])

    @property
    def horizon(self) -> int:
        return int(self.states.shape[1] - 1)

    def belief(self, i: int, t: int) -> ParticleBelief:
        return ParticleBelief.from_log_weights(self.states[i, t], self.log_weights[i, t])

    def normalized_weights(self) -> np.ndarray:
        return _normalize_log(self.log_weights)

    def returns(self, discount: float = 1.0) -> np.ndarray:
        weights = discount ** np.arange(self.horizon + 1)
        return self.costs @ weights


def gen_belief_trajectories(
    belief: ParticleBelief,
    policy: Policy,
    horizon: int,
    n_traj: int,
    model: PomdpModel,
    variant: str | None = None,
    rng=None,
    first_action=None,
    update_variant: str | None = None,
    max_retries: int = 10,
) -> BeliefTrajectoryBatch:
    """Advance ``n_traj`` copies of ``belief`` for ``horizon`` GENPF steps.

    Random streams are spawned per step from ``rng``, so results are a
    deterministic function of the root seed. A row whose weights all vanish is
    re-stepped with fresh draws up to ``max_retries`` times.
    """
    if horizon < 0:
        raise InvalidInputError("horizon must be >= 0")
    if n_traj < 1:
        raise InvalidInputError("need at least one trajectory")
    variant = check_variant(variant or model.variant)
    update_variant = check_variant(update_variant or variant)
    rng = as_generator(rng)
    step_rngs = rng.spawn(horizon + 1)

    Np, d = belief.states.shape
    S = np.empty((n_traj, horizon + 1, Np, d))
    LW = np.empty((n_traj, horizon + 1, Np))
    A = np.empty((n_traj, horizon + 1), dtype=np.int64)
    C = np.zeros((n_traj, horizon + 1))
    S[:, 0] = belief.states
    LW[:, 0] = belief.log_weights()
    retries = 0

    for t in range(horizon + 1):
        if t == 0 and first_action is not None:
            A[:, 0] = model.action_id(first_action)
        else:
            A[:, t] = policy.act_batch(S[:, t], LW[:, t], t)
        if t == horizon:
            break
        srng = step_rngs[t]
        nxt, lw, rho, bad = _genpf_batch(S[:, t], LW[:, t], A[:, t], model, variant, update_variant, srng)
        attempts = 0
        while bad.any():
            if attempts >= max_retries:
                row = int(np.flatnonzero(bad)[0])
                raise DegenerateBeliefError(
                    f"degenerate belief after {max_retries} retries", trajectory=row, step=t
                )
            rows = np.flatnonzero(bad)
            n2, l2, r2, b2 = _genpf_batch(S[rows, t], LW[rows, t], A[rows, t], model, variant, update_variant, srng)
            nxt[rows], lw[rows], rho[rows] = n2, l2, r2
            bad[rows] = b2
            retries += rows.size
            attempts += 1
        S[:, t + 1], LW[:, t + 1], C[:, t] = nxt, lw, rho

    w_last = _normalize_log(LW[:, horizon])
    acts = np.broadcast_to(A[:, horizon, None], w_last.shape)
    C[:, horizon] = np.sum(w_last * model.cost(S[:, horizon], acts), axis=1)
    return BeliefTrajectoryBatch(S, LW, A, C, variant, update_variant, retries)


def return_support(model: PomdpModel, horizon: int, discount: float = 1.0, variant: str | None = None) -> tuple[float, float]:
    lo, hi = model.cost_bounds(variant or model.variant)
    weights = discount ** np.arange(horizon + 1)
    return float(lo * weights.sum()), float(hi * weights.sum())


def returns_from_batch(batch: BeliefTrajectoryBatch, model: PomdpModel, discount: float | None = None) -> SortedSample:
    gamma = model.discount if discount is None else discount
    lo, hi = return_support(model, batch.horizon, gamma, batch.variant)
    values = batch.returns(gamma)
    slack = 1e-9 * max(1.0, abs(lo), abs(hi))
    if batch.variant == SIMPLIFIED and (values.min() < lo - slack or values.max() > hi + slack):
        raise InvalidInputError("sampled return outside the declared cost support")
    # original-variant reward noise is unbounded; its support is a +-6 sd envelope
    values = np.clip(values, lo, hi)
    return SortedSample.from_values(values, lo, hi)


def sample_returns(
    belief: ParticleBelief,
    first_action,
    policy: Policy,
    horizon: int,
    n_traj: int,
    model: PomdpModel,
    variant: str | None = None,
    rng=None,
    discount: float | None = None,
    update_variant: str | None = None,
) -> SortedSample:
    """Sorted sample of ``n_traj`` particle-belief returns with support bounds attached.

    ``discount=None`` uses the model's discount factor; pass 1.0 for undiscounted sums.
    """
    batch = gen_belief_trajectories(
        belief, policy, horizon, n_traj, model, variant, rng, first_action=first_action, update_variant=update_variant
    )
    return returns_from_batch(batch, model, discount)


def estimate_q(belief, action, alpha, policy, horizon, n_traj, model, variant=None, rng=None, discount=None) -> float:
    sample = sample_returns(belief, action, policy, horizon, n_traj, model, variant, rng, discount)
    return empirical_cvar(sample, alpha)


def estimate_v(belief, alpha, policy, horizon, n_traj, model, variant=None, rng=None, discount=None) -> float:
    action = policy.act(belief, 0)
    return estimate_q(belief, action, alpha, policy, horizon, n_traj, model, variant, rng, discount)
