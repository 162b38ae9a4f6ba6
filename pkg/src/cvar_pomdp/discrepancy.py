"""Observation-model discrepancy: offline TV table, importance-sampled ``m``, and the accumulated epsilon."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
from scipy.spatial import cKDTree
from scipy.special import logsumexp

from .errors import InvalidInputError, TableQualityError
from .pomdp_core import (
    ORIGINAL,
    SIMPLIFIED,
    BeliefTrajectoryBatch,
    ParticleBelief,
    PomdpModel,
    _normalize_log,
    as_generator,
)

TABLE_VERSION = 1
NORMALIZATIONS = ("self", "table", "knn")


# ---------------------------------------------------------------- proposals


class Proposal:
    """Offline proposal ``Q0`` over states: samples full states, density on embedded coordinates."""

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def log_density(self, embedded: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def describe(self) -> dict:
        return {"kind": type(self).__name__}


class UniformBoxProposal(Proposal):
    """Uniform on an axis-aligned box in embedded coordinates.

    ``template`` supplies the non-embedded state components; ``embed_slice``
    names which state columns the box covers.
    """

    def __init__(self, lo, hi, template, embed_columns):
        self.lo = np.asarray(lo, dtype=float)
        self.hi = np.asarray(hi, dtype=float)
        if np.any(self.hi <= self.lo):
            raise InvalidInputError("proposal box must have positive volume")
        self.template = np.asarray(template, dtype=float)
        self.columns = list(embed_columns)
        self._log_vol = float(np.sum(np.log(self.hi - self.lo)))

    def sample(self, n, rng):
        out = np.tile(self.template, (n, 1))
        out[:, self.columns] = rng.uniform(self.lo, self.hi, size=(n, self.lo.size))
        return out

    def log_density(self, embedded):
        e = np.asarray(embedded, dtype=float)
        inside = np.all((e >= self.lo) & (e <= self.hi), axis=-1)
        return np.where(inside, -self._log_vol, -np.inf)

    def describe(self):
        return {"kind": "uniform-box", "lo": self.lo.tolist(), "hi": self.hi.tolist(), "columns": self.columns}


class FiniteUniformProposal(Proposal):
    """Uniform over a finite list of states; ``sample`` returns every state once."""

    def __init__(self, states):
        self.states = np.atleast_2d(np.asarray(states, dtype=float))

    def sample(self, n, rng):
        return self.states.copy()

    def log_density(self, embedded):
        e = np.asarray(embedded, dtype=float)
        return np.full(e.shape[:-1], -np.log(self.states.shape[0]))

    def describe(self):
        return {"kind": "finite-uniform", "n": int(self.states.shape[0])}


# ---------------------------------------------------------------- table


@dataclass(eq=False)
class DiscrepancyTable:
    states: np.ndarray
    embedded: np.ndarray
    log_q0: np.ndarray
    delta: np.ndarray
    n_z: int
    metadata: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.states = np.atleast_2d(np.asarray(self.states, dtype=float))
        self.embedded = np.atleast_2d(np.asarray(self.embedded, dtype=float))
        self.log_q0 = np.asarray(self.log_q0, dtype=float).ravel()
        self.delta = np.asarray(self.delta, dtype=float).ravel()
        n = self.states.shape[0]
        if n == 0:
            raise InvalidInputError("discrepancy table is empty")
        if not (self.embedded.shape[0] == self.log_q0.size == self.delta.size == n):
            raise InvalidInputError("table columns must be aligned")
        if np.any(self.delta < -1e-12) or np.any(self.delta > 2 + 1e-12):
            raise InvalidInputError("delta_hat must lie in [0, 2]")
        if not np.all(np.isfinite(self.log_q0)):
            raise InvalidInputError("proposal density must be positive at every stored state")
        self.delta = np.clip(self.delta, 0.0, 2.0)
        self._tree = cKDTree(self.embedded)

    @property
    def size(self) -> int:
        return int(self.delta.size)

    @property
    def q0_density(self) -> np.ndarray:
        return np.exp(self.log_q0)

    def neighbours(self, points: np.ndarray, k: int) -> np.ndarray:
        if k < 1 or k > self.size:
            raise InvalidInputError(f"K must lie in [1, {self.size}], got {k}")
        _, idx = self._tree.query(np.asarray(points, dtype=float), k=k)
        return np.asarray(idx).reshape(len(points), k)

    def to_json(self, path) -> None:
        doc = {
            "version": TABLE_VERSION,
            "n_z": self.n_z,
            "metadata": self.metadata,
            "states": self.states.tolist(),
            "embedded": self.embedded.tolist(),
            "log_q0": self.log_q0.tolist(),
            "delta": self.delta.tolist(),
        }
        Path(path).write_text(json.dumps(doc))

    @classmethod
    def from_json(cls, path) -> "DiscrepancyTable":
        doc = json.loads(Path(path).read_text())
        if doc.get("version") != TABLE_VERSION:
            raise InvalidInputError(f"unsupported table version {doc.get('version')}")
        return cls(doc["states"], doc["embedded"], doc["log_q0"], doc["delta"], doc["n_z"], doc["metadata"])


def model_fingerprint(model: PomdpModel) -> str:
    """Stable hash of a model's configuration, stored with tables."""
    cfg = getattr(model, "config", None)
    payload = json.dumps({"name": model.name, "config": repr(cfg)}, sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


def tv_terms(log_p: np.ndarray, log_q: np.ndarray) -> np.ndarray:
    """``2|p - q| / (p + q)`` computed stably from log-densities; NaN where both vanish."""
    with np.errstate(invalid="ignore"):
        diff = log_p - log_q
        out = 2.0 * np.abs(np.tanh(diff / 2.0))
    both_zero = np.isneginf(log_p) & np.isneginf(log_q)
    return np.where(both_zero, np.nan, out)


def _delta_for_states(model, states, n_z, rng, action, chunk):
    """Mixture-sampled TV estimates for each state; returns (delta, skipped count)."""
    n = states.shape[0]
    acts = np.full(n, action)
    totals = np.zeros(n)
    counts = np.zeros(n, dtype=np.int64)
    skipped = 0
    need = np.full(n, n_z)
    rounds = 0
    while need.sum() > 0:
        rows = np.repeat(np.arange(n), need)
        x = states[rows]
        a = acts[rows]
        from_p = rng.random(rows.size) < 0.5
        z = np.empty((rows.size, model.obs_dim))
        if from_p.any():
            z[from_p] = model.obs_sample(x[from_p], a[from_p], ORIGINAL, rng)
        if (~from_p).any():
            z[~from_p] = model.obs_sample(x[~from_p], a[~from_p], SIMPLIFIED, rng)
        terms = np.empty(rows.size)
        for s in range(0, rows.size, chunk):
            sl = slice(s, s + chunk)
            lp = model.obs_log_density(z[sl], x[sl, None], a[sl], ORIGINAL)[:, 0]
            lq = model.obs_log_density(z[sl], x[sl, None], a[sl], SIMPLIFIED)[:, 0]
            terms[sl] = tv_terms(lp, lq)
        ok = ~np.isnan(terms)
        skipped += int((~ok).sum())
        np.add.at(totals, rows[ok], terms[ok])
        np.add.at(counts, rows[ok], 1)
        need = n_z - counts
        rounds += 1
        if skipped > 0.01 * n * n_z or rounds > 50:
            raise TableQualityError(f"{skipped} observations with zero mixture density (>1% of draws)")
    return totals / counts, skipped


def build_discrepancy_table(
    model: PomdpModel,
    proposal: Proposal,
    n_delta: int,
    n_z: int,
    rng=None,
    action: int = 0,
    chunk: int = 4096,
    seed: int | None = None,
) -> DiscrepancyTable:
    """Offline phase: draw ``n_delta`` states from ``proposal`` and estimate the TV at each.

    Observations are drawn from the equal mixture of both observation models,
    so ``2|p - q| / (p + q)`` is an unbiased per-draw estimate of ``int |p - q|``.
    """
    if n_delta < 1 or n_z < 1:
        raise InvalidInputError("n_delta and n_z must be positive")
    rng = as_generator(rng if rng is not None else seed)
    states = proposal.sample(n_delta, rng)
    embedded = model.embed(states)
    log_q0 = proposal.log_density(embedded)
    delta, skipped = _delta_for_states(model, states, n_z, rng, action, chunk)
    meta = {
        "model": model.name,
        "model_hash": model_fingerprint(model),
        "proposal": proposal.describe(),
        "seed": seed,
        "skipped": skipped,
        "n_delta": int(states.shape[0]),
    }
    return DiscrepancyTable(states, embedded, log_q0, delta, n_z, meta)


# ---------------------------------------------------------------- online estimates


@dataclass
class MHat:
    """Per-particle ``m`` estimates under every normalization, plus the max importance ratio seen."""

    values: dict[str, np.ndarray]
    max_ratio: float
    fallback: int


def m_hat_states(
    states: np.ndarray,
    actions: np.ndarray,
    table: DiscrepancyTable,
    k: int,
    model: PomdpModel,
) -> MHat:
    """Importance-sampled ``E_{x' ~ P(.|x,a)}[Delta(x')]`` for many ``(x, a)`` pairs at once.

    Only the ``k`` stored states nearest the predicted next state contribute.
    Normalizations: ``self`` divides by the sum of the ratios, ``table`` by the
    table size, ``knn`` by ``k``.
    """
    states = np.atleast_2d(np.asarray(states, dtype=float))
    actions = np.broadcast_to(np.asarray(actions), states.shape[:1])
    if table.size == 0 or k < 1:
        raise InvalidInputError("need a nonempty table and K >= 1")
    centre = model.predict_embedded(states, actions)
    idx = table.neighbours(centre, k)
    log_p = model.transition_log_density(table.embedded[idx], states[:, None, :], actions[:, None])
    log_r = log_p - table.log_q0[idx]
    d = table.delta[idx]
    ratio = np.exp(log_r)
    lse = logsumexp(log_r, axis=1, keepdims=True)
    dead = ~np.isfinite(lse[:, 0])
    with np.errstate(invalid="ignore"):
        w_self = np.exp(log_r - lse)
    w_self = np.where(dead[:, None], 0.0, w_self)
    # no neighbour reachable: fall back to the nearest stored state's estimate
    self_vals = np.where(dead, d[:, 0], np.sum(w_self * d, axis=1))
    vals = {
        "self": self_vals,
        "table": np.sum(ratio * d, axis=1) / table.size,
        "knn": np.sum(ratio * d, axis=1) / k,
    }
    max_ratio = float(ratio.max()) if ratio.size else 0.0
    return MHat(vals, max_ratio, int(dead.sum()))


def m_hat_state(x, a, table: DiscrepancyTable, k: int, model: PomdpModel, normalization: str = "self") -> float:
    _check_norm(normalization)
    a = model.action_id(a)
    return float(m_hat_states(np.atleast_2d(x), np.array([a]), table, k, model).values[normalization][0])


def m_hat_belief(belief: ParticleBelief, a, table, k, model, normalization: str = "self") -> float:
    _check_norm(normalization)
    a = model.action_id(a)
    m = m_hat_states(belief.states, np.full(belief.n_particles, a), table, k, model).values[normalization]
    return float(belief.normalized_weights() @ m)


def _check_norm(normalization: str) -> None:
    if normalization not in NORMALIZATIONS:
        raise InvalidInputError(f"normalization must be one of {NORMALIZATIONS}")


@dataclass
class EpsilonEstimate:
    value: float
    terms: np.ndarray
    horizon: int
    n_traj: int
    D: float
    r_min: float
    r_max: float
    normalization: str = "self"
    D_is_proxy: bool = True
    diagnostics: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.terms = np.asarray(self.terms, dtype=float)
        if np.any(self.terms < 0):
            raise InvalidInputError("per-step terms must be nonnegative")

    def cumulative(self) -> np.ndarray:
        return np.minimum(np.cumsum(self.terms), 1.0)


def epsilon_hat(
    batch: BeliefTrajectoryBatch,
    table: DiscrepancyTable,
    k: int,
    model: PomdpModel,
    normalization: str = "self",
    policy=None,
) -> EpsilonEstimate:
    """Accumulated discrepancy ``min(1, sum_t mean_i m(b_t^i, a_t^i))`` over the batch.

    The actions recorded in ``batch`` are the policy's choices, so ``policy`` is
    accepted only for interface symmetry.
    """
    _check_norm(normalization)
    H, N, Np = batch.horizon, batch.n_traj, batch.states.shape[2]
    terms = {n: np.zeros(H) for n in NORMALIZATIONS}
    max_ratio = 0.0
    fallback = 0
    w = batch.normalized_weights()
    for t in range(H):
        flat = batch.states[:, t].reshape(N * Np, -1)
        acts = np.repeat(batch.actions[:, t], Np)
        mh = m_hat_states(flat, acts, table, k, model)
        max_ratio = max(max_ratio, mh.max_ratio)
        fallback += mh.fallback
        for name, vals in mh.values.items():
            terms[name][t] = float(np.mean(np.sum(w[:, t] * vals.reshape(N, Np), axis=1)))
    r_min, r_max = model.cost_bounds(SIMPLIFIED)
    chosen = terms[normalization]
    diag = {f"eps_{n}": float(min(terms[n].sum(), 1.0)) for n in NORMALIZATIONS}
    diag["fallback_particles"] = fallback
    return EpsilonEstimate(
        value=float(min(chosen.sum(), 1.0)),
        terms=chosen,
        horizon=H,
        n_traj=N,
        D=max(max_ratio, 1e-300) if H > 0 else 1.0,
        r_min=r_min,
        r_max=r_max,
        normalization=normalization,
        diagnostics=diag,
    )


def epsilon_concentration(estimate: EpsilonEstimate, eta: float) -> float:
    """Tail bound ``2 exp(-2 eta^2 N_b / (D^2 (T-k)^2 (R_max - R_min)^2))``."""
    if estimate.D <= 0:
        raise InvalidInputError("D must be positive")
    if eta < 0:
        raise InvalidInputError("eta must be nonnegative")
    scale = estimate.D * estimate.horizon * (estimate.r_max - estimate.r_min)
    if scale == 0:
        return 2.0 if eta == 0 else 0.0
    return float(2.0 * np.exp(-2.0 * eta**2 * estimate.n_traj / scale**2))
