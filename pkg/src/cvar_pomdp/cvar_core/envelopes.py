"""Stochastically-dominating CDF envelopes built from a pointwise CDF gap ``g``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid

from ..errors import InvalidInputError
from .types import DiscreteCdf


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Right-continuous step function: ``values[j]`` on ``[xs[j], xs[j+1])``, 0 left of ``xs[0]``."""

    xs: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        xs = np.asarray(self.xs, dtype=float).ravel()
        vals = np.asarray(self.values, dtype=float).ravel()
        if xs.size == 0 or xs.size != vals.size:
            raise InvalidInputError("grid and values must be nonempty and aligned")
        if np.any(np.diff(xs) <= 0):
            raise InvalidInputError("grid must be strictly increasing")
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "values", vals)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        idx = np.searchsorted(self.xs, x, side="right") - 1
        return np.where(idx >= 0, self.values[np.clip(idx, 0, None)], 0.0)


def envelope_cdf_lower(cdf_Y: DiscreteCdf, g: GridFunction) -> DiscreteCdf:
    """``F_L(y) = min(1, F_Y(y) + g(y))``.

    If ``F_X <= F_Y + g`` pointwise then ``CVaR(F_L) <= CVaR(F_X)``.
    """
    if np.any(g.values < 0):
        raise InvalidInputError("g must be nonnegative")
    if np.any(np.diff(g.values) < 0):
        raise InvalidInputError("g must be nondecreasing on its grid")
    xs = np.union1d(cdf_Y.xs, g.xs)
    vals = np.minimum(1.0, np.asarray(cdf_Y(xs)) + g(xs))
    vals[-1] = 1.0 if xs[-1] >= cdf_Y.xs[-1] else vals[-1]
    return DiscreteCdf(xs, vals)


def cumulative_gap(h: GridFunction) -> GridFunction:
    """``g(z) = int_{x_0}^{z} h`` by the composite trapezoid rule, sampled at the grid points."""
    if np.any(h.values < 0):
        raise InvalidInputError("density gap h must be nonnegative")
    g = cumulative_trapezoid(h.values, h.xs, initial=0.0)
    return GridFunction(h.xs, np.maximum.accumulate(g))


def envelope_cdf_from_density_gap(cdf_Y: DiscreteCdf, h: GridFunction) -> DiscreteCdf:
    """Envelope from a bound ``|f_X - f_Y| <= h`` on the density difference."""
    return envelope_cdf_lower(cdf_Y, cumulative_gap(h))
