"""Value types for loss samples, step CDFs and risk parameters."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidInputError

_TOL = 1e-12


def _frozen_array(values) -> np.ndarray:
    arr = np.array(values, dtype=float).ravel()
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class SortedSample:
    """Ascending loss sample with optional support bounds ``[support_lo, support_hi]``."""

    values: np.ndarray
    support_lo: float | None = None
    support_hi: float | None = None

    def __post_init__(self):
        vals = _frozen_array(self.values)
        object.__setattr__(self, "values", vals)
        if vals.size == 0:
            raise InvalidInputError("sample must contain at least one value")
        if not np.all(np.isfinite(vals)):
            raise InvalidInputError("sample values must be finite")
        if np.any(np.diff(vals) < 0):
            raise InvalidInputError("sample values must be non-decreasing")
        lo, hi = self.support_lo, self.support_hi
        if lo is not None and vals[0] < lo:
            raise InvalidInputError(f"value {vals[0]} below support_lo {lo}")
        if hi is not None and vals[-1] > hi:
            raise InvalidInputError(f"value {vals[-1]} above support_hi {hi}")
        if lo is not None and hi is not None and lo > hi:
            raise InvalidInputError("support_lo exceeds support_hi")

    @classmethod
    def from_values(cls, values, support_lo=None, support_hi=None) -> "SortedSample":
        return cls(np.sort(np.asarray(values, dtype=float).ravel()), support_lo, support_hi)

    @property
    def n(self) -> int:
        return int(self.values.size)

    def __len__(self) -> int:
        return self.n

    def mean(self) -> float:
        return float(self.values.mean())

    def with_support(self, support_lo=None, support_hi=None) -> "SortedSample":
        return SortedSample(self.values, support_lo, support_hi)


@dataclass(frozen=True, eq=False)
class DiscreteCdf:
    """Right-continuous step CDF given by knots ``xs`` and values ``probs``.

    ``F(x) = probs[j]`` for ``xs[j] <= x < xs[j+1]`` and 0 left of ``xs[0]``.
    """

    xs: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        xs = _frozen_array(self.xs)
        ps = np.array(self.probs, dtype=float).ravel()
        if xs.size == 0 or xs.size != ps.size:
            raise InvalidInputError("knots and probabilities must be nonempty and aligned")
        if np.any(np.diff(xs) <= 0):
            raise InvalidInputError("knot locations must be strictly increasing")
        if np.any(np.diff(ps) < -_TOL) or ps[0] < -_TOL or ps[-1] > 1 + 1e-9:
            raise InvalidInputError("CDF values must be non-decreasing within [0, 1]")
        if abs(ps[-1] - 1.0) > 1e-9:
            raise InvalidInputError(f"final CDF value must be 1, got {ps[-1]}")
        ps = np.clip(np.maximum.accumulate(ps), 0.0, 1.0)
        ps[-1] = 1.0
        ps.setflags(write=False)
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "probs", ps)

    @classmethod
    def from_atoms(cls, locations, masses) -> "DiscreteCdf":
        """Build from (possibly repeated, unsorted) atom locations and masses."""
        loc = np.asarray(locations, dtype=float).ravel()
        m = np.asarray(masses, dtype=float).ravel()
        if loc.size == 0 or loc.size != m.size:
            raise InvalidInputError("atoms must be nonempty and aligned")
        if np.any(m < 0):
            raise InvalidInputError("atom masses must be nonnegative")
        total = m.sum()
        if total <= 0:
            raise InvalidInputError("atom masses must have positive total")
        uniq, inv = np.unique(loc, return_inverse=True)
        mass = np.bincount(inv, weights=m / total)
        cum = np.cumsum(mass)
        cum[-1] = 1.0
        return cls(uniq, cum)

    @classmethod
    def from_sample(cls, sample: SortedSample) -> "DiscreteCdf":
        return cls.from_atoms(sample.values, np.ones(sample.n))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        idx = np.searchsorted(self.xs, x, side="right") - 1
        out = np.where(idx >= 0, self.probs[np.clip(idx, 0, None)], 0.0)
        return out if out.ndim else float(out)

    @property
    def masses(self) -> np.ndarray:
        return np.diff(self.probs, prepend=0.0)

    def mean(self) -> float:
        return float(np.dot(self.xs, self.masses))

    def quantile(self, v: float) -> float:
        """Generalized inverse ``inf{x : F(x) >= v}`` for ``v`` in (0, 1]."""
        idx = int(np.searchsorted(self.probs, v - 1e-15, side="left"))
        return float(self.xs[min(idx, self.xs.size - 1)])


@dataclass(frozen=True)
class RiskParams:
    alpha: float
    delta: float = 0.05

    def __post_init__(self):
        if not (0.0 < self.alpha <= 1.0):
            raise InvalidInputError(f"alpha must lie in (0, 1], got {self.alpha}")
        if not (0.0 < self.delta <= 0.5):
            raise InvalidInputError(f"delta must lie in (0, 0.5], got {self.delta}")


def check_alpha(alpha: float) -> float:
    if not (0.0 < alpha <= 1.0):
        raise InvalidInputError(f"alpha must lie in (0, 1], got {alpha}")
    return float(alpha)


def check_unit(name: str, value: float) -> float:
    if not (0.0 <= value <= 1.0):
        raise InvalidInputError(f"{name} must lie in [0, 1], got {value}")
    return float(value)


def dkw_radius(n: int, delta: float) -> float:
    """One-sided DKW radius ``sqrt(ln(1/delta) / (2n))``."""
    return float(np.sqrt(np.log(1.0 / delta) / (2.0 * n)))
