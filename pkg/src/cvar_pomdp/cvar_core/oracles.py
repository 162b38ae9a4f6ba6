"""Synthetic distributions with exact CDF/quantile access, used as validation oracles."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy import stats
from scipy.special import ndtr, ndtri

from ..errors import InvalidInputError
from .types import check_alpha, check_unit

KINDS = ("truncated-gmm", "truncated-normal", "beta", "laplace", "cdf-shift", "uniform", "point-mass")

_INV_GRID = 1 << 17


@dataclass(frozen=True, eq=False)
class DistributionOracle:
    kind: str
    params: dict[str, Any] = field(default_factory=dict)
    lo: float = -np.inf
    hi: float = np.inf
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidInputError(f"unsupported oracle kind {self.kind!r}")
        if self.kind == "truncated-gmm":
            # tabulate the CDF once for grid inversion
            xs = np.linspace(self.lo, self.hi, _INV_GRID)
            object.__setattr__(self, "_grid", (xs, self._gmm_cdf(xs)))

    # ------------------------------------------------------------ constructors

    @classmethod
    def truncated_gmm(cls, means, variances, weights, lo=-1.0, hi=1.0, seed=0) -> "DistributionOracle":
        w = np.asarray(weights, dtype=float)
        if np.any(w < 0) or w.sum() <= 0:
            raise InvalidInputError("GMM weights must be nonnegative with positive sum")
        params = {
            "means": np.asarray(means, dtype=float),
            "sds": np.sqrt(np.asarray(variances, dtype=float)),
            "weights": w / w.sum(),
        }
        return cls("truncated-gmm", params, float(lo), float(hi), seed)

    @classmethod
    def truncated_normal(cls, mu=0.0, sigma=1.0, lo=-1.0, hi=1.0, seed=0) -> "DistributionOracle":
        if sigma <= 0:
            raise InvalidInputError("sigma must be positive")
        return cls("truncated-normal", {"mu": float(mu), "sigma": float(sigma)}, float(lo), float(hi), seed)

    @classmethod
    def beta(cls, a: float, b: float, seed=0) -> "DistributionOracle":
        return cls("beta", {"a": float(a), "b": float(b)}, 0.0, 1.0, seed)

    @classmethod
    def laplace(cls, loc=0.0, scale=1.0, lo=-10.0, hi=10.0, seed=0) -> "DistributionOracle":
        """Laplace truncated to ``[lo, hi]`` so that a finite support exists."""
        return cls("laplace", {"loc": float(loc), "scale": float(scale)}, float(lo), float(hi), seed)

    @classmethod
    def uniform(cls, lo=0.0, hi=1.0, seed=0) -> "DistributionOracle":
        return cls("uniform", {}, float(lo), float(hi), seed)

    @classmethod
    def point_mass(cls, c: float, seed=0) -> "DistributionOracle":
        return cls("point-mass", {"c": float(c)}, float(c), float(c), seed)

    @classmethod
    def cdf_shift(cls, base: "DistributionOracle", eps: float, seed=0) -> "DistributionOracle":
        """``G(x) = min(F(x) + eps, 1)`` on ``[lo, hi]`` of the base distribution."""
        check_unit("eps", eps)
        if not np.isfinite(base.lo):
            raise InvalidInputError("cdf-shift needs a base with finite lower support")
        return cls("cdf-shift", {"base": base, "eps": float(eps)}, base.lo, base.hi, seed)

    # ------------------------------------------------------------ internals

    def _gmm_raw_cdf(self, x):
        p = self.params
        z = (np.asarray(x, dtype=float)[..., None] - p["means"]) / p["sds"]
        return ndtr(z) @ p["weights"]

    def _gmm_cdf(self, x):
        f_lo, f_hi = self._gmm_raw_cdf(self.lo), self._gmm_raw_cdf(self.hi)
        return np.clip((self._gmm_raw_cdf(x) - f_lo) / (f_hi - f_lo), 0.0, 1.0)

    def _normal_limits(self):
        p = self.params
        return ndtr((self.lo - p["mu"]) / p["sigma"]), ndtr((self.hi - p["mu"]) / p["sigma"])

    def _laplace_limits(self):
        p = self.params
        d = stats.laplace(p["loc"], p["scale"])
        return d, d.cdf(self.lo), d.cdf(self.hi)

    # ------------------------------------------------------------ public API

    @property
    def support(self) -> tuple[float, float]:
        return self.lo, self.hi

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        k, p = self.kind, self.params
        if k == "truncated-gmm":
            out = self._gmm_cdf(x)
        elif k == "truncated-normal":
            a, b = self._normal_limits()
            out = np.clip((ndtr((x - p["mu"]) / p["sigma"]) - a) / (b - a), 0.0, 1.0)
        elif k == "beta":
            out = stats.beta.cdf(x, p["a"], p["b"])
        elif k == "laplace":
            d, a, b = self._laplace_limits()
            out = np.clip((d.cdf(x) - a) / (b - a), 0.0, 1.0)
        elif k == "uniform":
            out = np.clip((x - self.lo) / (self.hi - self.lo), 0.0, 1.0)
        elif k == "point-mass":
            out = (x >= p["c"]).astype(float)
        else:  # cdf-shift
            base, eps = p["base"], p["eps"]
            out = np.where(x < self.lo, 0.0, np.minimum(base.cdf(x) + eps, 1.0))
        return out if np.ndim(out) else float(out)

    def ppf(self, v):
        """Generalized inverse ``inf{x : F(x) >= v}``."""
        v = np.clip(np.asarray(v, dtype=float), 0.0, 1.0)
        k, p = self.kind, self.params
        if k == "truncated-gmm":
            xs, fs = self._grid
            out = np.interp(v, fs, xs)
        elif k == "truncated-normal":
            a, b = self._normal_limits()
            out = np.clip(p["mu"] + p["sigma"] * ndtri(a + v * (b - a)), self.lo, self.hi)
        elif k == "beta":
            out = stats.beta.ppf(v, p["a"], p["b"])
        elif k == "laplace":
            d, a, b = self._laplace_limits()
            out = np.clip(d.ppf(a + v * (b - a)), self.lo, self.hi)
        elif k == "uniform":
            out = self.lo + v * (self.hi - self.lo)
        elif k == "point-mass":
            out = np.full_like(v, p["c"])
        else:
            base, eps = p["base"], p["eps"]
            out = np.where(v <= eps, self.lo, base.ppf(np.clip(v - eps, 0.0, 1.0)))
        return out if np.ndim(out) else float(out)

    def sample(self, n: int, rng: np.random.Generator | None = None) -> np.ndarray:
        rng = np.random.default_rng(self.seed) if rng is None else rng
        k, p = self.kind, self.params
        if k == "truncated-gmm":
            return _rejection_gmm(p, self.lo, self.hi, n, rng)
        if k == "beta":
            return rng.beta(p["a"], p["b"], size=n)
        return np.asarray(self.ppf(rng.random(n)), dtype=float)

    def mean(self, grid: int = 100_000) -> float:
        return oracle_cvar(self, 1.0, grid)


def _rejection_gmm(p, lo, hi, n, rng) -> np.ndarray:
    out = np.empty(n)
    filled = 0
    while filled < n:
        m = max(int((n - filled) * 1.3), 16)
        comp = rng.choice(p["weights"].size, size=m, p=p["weights"])
        draws = p["means"][comp] + p["sds"][comp] * rng.standard_normal(m)
        keep = draws[(draws >= lo) & (draws <= hi)]
        take = min(keep.size, n - filled)
        out[filled : filled + take] = keep[:take]
        filled += take
    return out


def oracle_cvar(dist: DistributionOracle, alpha: float, grid: int = 100_000) -> float:
    """``(1/alpha) * int_{1-alpha}^1 F^{-1}(v) dv`` by the composite trapezoid rule."""
    alpha = check_alpha(alpha)
    if not isinstance(dist, DistributionOracle):
        raise InvalidInputError("oracle_cvar expects a DistributionOracle")
    if dist.kind == "point-mass":
        return float(dist.params["c"])
    v = np.linspace(1.0 - alpha, 1.0, grid)
    q = np.asarray(dist.ppf(v), dtype=float)
    return float(np.trapezoid(q, v) / alpha)


def gmm_moments(means, variances, weights) -> tuple[float, float]:
    """Untruncated mixture mean and variance."""
    m, v, w = (np.asarray(a, dtype=float) for a in (means, variances, weights))
    w = w / w.sum()
    mu = float(w @ m)
    return mu, float(w @ (v + m**2) - mu**2)


def ks_distance(a: DistributionOracle, b: DistributionOracle, grid: int = 200_001) -> float:
    """``sup_x |F_a(x) - F_b(x)|`` evaluated on a dense grid over the joint support."""
    lo = min(a.lo, b.lo)
    hi = max(a.hi, b.hi)
    if not (np.isfinite(lo) and np.isfinite(hi)):
        raise InvalidInputError("ks_distance needs finite supports")
    xs = np.linspace(lo, hi, grid)
    return float(np.max(np.abs(np.asarray(a.cdf(xs)) - np.asarray(b.cdf(xs)))))
