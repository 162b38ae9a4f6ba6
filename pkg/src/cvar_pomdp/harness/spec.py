"""Experiment specifications, result rows and deterministic config hashing."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from ..errors import ConfigError
from ..pomdp_core import ORIGINAL, SIMPLIFIED

KINDS = (
    "open-loop-eval",
    "sweep-horizon",
    "sweep-alpha",
    "sweep-nsamples",
    "timing",
    "gmm-demo",
    "thomas-compare",
    "coverage-mc",
    "build-table",
)
ENV_KINDS = {"open-loop-eval", "sweep-horizon", "sweep-alpha", "sweep-nsamples", "timing", "build-table"}
DEFAULT_GRIDS = {
    "sweep-horizon": (4, 5, 6, 7, 8, 9, 10, 11, 12),
    "sweep-alpha": (0.05, 0.1, 0.2, 0.3, 0.5, 0.7, 0.9),
    "sweep-nsamples": (100, 200, 400, 600, 1000),
    "gmm-demo": (100, 1000, 10000),
    "coverage-mc": (100,),
    "thomas-compare": (100, 1000),
}
DEFAULT_ALPHA = {"gmm-demo": 0.2}
# fields that change where or how fast results are produced, not what they are
_UNHASHED = {"out_dir", "parallel", "table_path"}


@dataclass(frozen=True)
class ExperimentSpec:
    kind: str
    environment: str = "light-dark"
    variants: tuple[str, str] = (ORIGINAL, SIMPLIFIED)
    alpha: float | None = None
    delta: float = 0.05
    n_b: int = 600
    n_p: int = 10
    horizon: int | None = None
    scripts: dict[str, tuple[str, ...]] | None = None
    table_path: str | None = None
    seed: int = 42
    reps: int | None = None
    out_dir: str = "results"
    n_delta: int = 100
    n_z: int = 2000
    k: int = 10
    normalization: str = "self"
    grid: tuple | None = None
    timing_sweep: str | None = None
    trivial_return_bounds: bool = False
    discount: float | None = None
    env_config: str | None = None
    parallel: int = 1
    options: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.alpha is None:
            object.__setattr__(self, "alpha", DEFAULT_ALPHA.get(self.kind, 0.5))
        if self.scripts is not None:
            object.__setattr__(self, "scripts", {k: tuple(v) for k, v in self.scripts.items()})
        if self.grid is not None:
            object.__setattr__(self, "grid", tuple(self.grid))
        object.__setattr__(self, "variants", tuple(self.variants))

    # -- construction

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentSpec":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(doc) - names
        if unknown:
            raise ConfigError(f"unknown experiment fields: {sorted(unknown)}")
        if "kind" not in doc:
            raise ConfigError("experiment spec needs a 'kind'")
        return cls(**doc)

    @classmethod
    def from_file(cls, path) -> "ExperimentSpec":
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"experiment file {p} not found")
        doc = yaml.safe_load(p.read_text()) or {}
        if not isinstance(doc, dict):
            raise ConfigError("experiment file must hold a mapping")
        return cls.from_dict(doc)

    def replace(self, **changes) -> "ExperimentSpec":
        return dataclasses.replace(self, **changes)

    # -- derived values

    def effective_grid(self) -> tuple:
        if self.grid is not None:
            return self.grid
        if self.kind == "timing":
            return DEFAULT_GRIDS["sweep-horizon"] if self.timing_sweep == "horizon" else (
                DEFAULT_GRIDS["sweep-nsamples"] if self.timing_sweep == "n_b" else (None,)
            )
        return DEFAULT_GRIDS.get(self.kind, (None,))

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["variants"] = list(self.variants)
        if self.scripts is not None:
            d["scripts"] = {k: list(v) for k, v in self.scripts.items()}
        if self.grid is not None:
            d["grid"] = list(self.grid)
        return d

    def config_hash(self) -> str:
        d = {k: v for k, v in self.to_dict().items() if k not in _UNHASHED}
        blob = json.dumps(d, sort_keys=True, default=str, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    # -- validation

    def validate(self) -> None:
        if self.kind not in KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}; choose from {KINDS}")
        if set(self.variants) != {ORIGINAL, SIMPLIFIED} or len(self.variants) != 2:
            raise ConfigError("variants must be the pair (original, simplified)")
        if not 0.0 < self.alpha <= 1.0:
            raise ConfigError("alpha must lie in (0, 1]")
        if not 0.0 < self.delta < 0.5:
            raise ConfigError("delta must lie in (0, 0.5)")
        for name in ("n_b", "n_p", "reps", "n_delta", "n_z", "k", "parallel"):
            val = getattr(self, name)
            if val is not None and int(val) < 1:
                raise ConfigError(f"{name} must be a positive integer")
        if self.horizon is not None and self.horizon < 0:
            raise ConfigError("horizon must be nonnegative")
        if self.timing_sweep not in (None, "horizon", "n_b"):
            raise ConfigError("timing_sweep must be 'horizon', 'n_b' or omitted")
        if self.normalization not in ("self", "table", "knn"):
            raise ConfigError("normalization must be self, table or knn")
        if self.discount is not None and not 0.0 < self.discount <= 1.0:
            raise ConfigError("discount must lie in (0, 1]")
        if self.table_path is not None and self.kind in ENV_KINDS - {"build-table"}:
            if not Path(self.table_path).exists():
                raise ConfigError(f"discrepancy table {self.table_path} not found; run build-table first")
        if self.kind in ENV_KINDS:
            self._validate_environment()

    def _validate_environment(self) -> None:
        from ..environments import ENVIRONMENTS, load_scripts, make_environment
        from ..errors import InvalidInputError

        if self.environment not in ENVIRONMENTS:
            raise ConfigError(f"unknown environment {self.environment!r}")
        model = make_environment(self.environment, SIMPLIFIED, config_path=self.env_config)
        scripts = self.scripts if self.scripts is not None else load_scripts(self.environment)
        if not scripts:
            raise ConfigError("no action scripts given")
        for name, acts in scripts.items():
            if len(acts) == 0:
                raise ConfigError(f"script {name!r} is empty")
            for a in acts:
                try:
                    model.action_id(a)
                except InvalidInputError as exc:
                    raise ConfigError(f"script {name!r}: {exc}") from None


@dataclass
class ResultRow:
    experiment: str
    config_hash: str
    rep: int
    seed: int
    metrics: dict[str, Any]

    def flat(self) -> dict[str, Any]:
        out = {"experiment": self.experiment, "config_hash": self.config_hash, "rep": self.rep, "seed": self.seed}
        out.update(self.metrics)
        return out
