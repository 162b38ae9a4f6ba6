"""Equal-weight 1-D Gaussian mixtures that match a target Normal's first two moments."""

from __future__ import annotations

import numpy as np

from ..errors import InvalidInputError

_LOG_2PI = np.log(2.0 * np.pi)


class MatchedGmm:
    """Mixture of ``K`` equal-weight components approximating ``N(0, 1)``.

    Component means are drawn from a standard Normal with a fixed construction
    seed, then centred and rescaled to variance ``1 - ratio**2``; every component
    has standard deviation ``ratio``. Mixture mean and variance are therefore
    exactly 0 and 1. Use ``scale`` in the methods to target ``N(0, scale**2)``.
    """

    def __init__(self, n_components: int, ratio: float, seed: int = 0, chunk_elems: int = 1 << 22):
        if n_components < 1:
            raise InvalidInputError("need at least one component")
        if not (0.0 < ratio <= 1.0):
            raise InvalidInputError("component ratio must lie in (0, 1]")
        rng = np.random.default_rng(seed)
        m = rng.standard_normal(n_components)
        if n_components > 1 and ratio < 1.0:
            m = m - m.mean()
            m = m / m.std() * np.sqrt(1.0 - ratio**2)
        else:
            # a lone component (or ratio 1) must carry the full unit variance itself
            m = np.zeros(n_components)
            ratio = 1.0
        self.means = m
        self.sd = float(ratio)
        self.n_components = int(n_components)
        self.seed = seed
        self._chunk = max(1, chunk_elems // n_components)

    def moments(self) -> tuple[float, float]:
        mu = float(self.means.mean())
        return mu, float(np.mean(self.means**2) + self.sd**2 - mu**2)

    def sample(self, shape, rng: np.random.Generator, scale=1.0) -> np.ndarray:
        comp = rng.integers(0, self.n_components, size=shape)
        draws = self.means[comp] + self.sd * rng.standard_normal(shape)
        return draws * scale

    def logpdf(self, x, scale=1.0) -> np.ndarray:
        """Log density of ``scale * Y`` at ``x``; ``scale`` broadcasts against ``x``."""
        x = np.asarray(x, dtype=float)
        scale = np.broadcast_to(np.asarray(scale, dtype=float), x.shape)
        u = (x / scale).ravel()
        out = np.empty(u.size)
        inv2 = -0.5 / self.sd**2
        for s in range(0, u.size, self._chunk):
            d = u[s : s + self._chunk, None] - self.means[None, :]
            e = d * d * inv2
            peak = e.max(axis=1)
            out[s : s + self._chunk] = peak + np.log(np.exp(e - peak[:, None]).sum(axis=1))
        out += -np.log(self.n_components) - np.log(self.sd) - 0.5 * _LOG_2PI
        return out.reshape(x.shape) - np.log(scale)


def normal_logpdf(x, scale=1.0) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return -0.5 * (x / scale) ** 2 - np.log(scale) - 0.5 * _LOG_2PI
