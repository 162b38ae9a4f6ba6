"""Typed environment configurations and their YAML mirrors shipped in ``data/``."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import yaml

from ..errors import ConfigError

Pair = tuple[float, float]


@dataclass(frozen=True)
class LightDarkConfig:
    grid_size: Pair = (7.0, 7.0)
    start: Pair = (1.0, 1.0)
    goal: Pair = (6.0, 6.0)
    goal_radius: float = 1.5
    transition_cov: float = 0.06
    beacons: tuple[Pair, ...] = ((1.0, 1.0), (1.0, 6.0), (6.0, 1.0), (6.0, 6.0))
    beacon_radius: float = 1.0
    obs_cov_near: float = 0.03
    obs_cov_far: float = 0.06
    obstacle: Pair = (5.0, 2.0)
    obstacle_radius: float = 3.0
    obstacle_hit_prob: float = 1.0
    reward_goal: float = 10.0
    reward_obstacle: float = -10.0
    reward_step: float = -2.0
    discount: float = 0.95
    horizon: int = 9
    gmm_components: int = 2500
    gmm_component_ratio: float = 0.22
    gmm_seed: int = 0
    proposal_lo: Pair = (0.0, 0.0)
    proposal_hi: Pair = (7.0, 7.0)

    def validate(self) -> None:
        _positive(self, "goal_radius", "beacon_radius", "obstacle_radius", "transition_cov", "obs_cov_near", "obs_cov_far")


@dataclass(frozen=True)
class LaserTagConfig:
    arena: Pair = (11.0, 7.0)
    walls: tuple[Pair, ...] = (
        (3.0, 3.0),
        (4.0, 3.0),
        (8.0, 1.0),
        (8.0, 2.0),
        (9.0, 5.0),
        (9.0, 6.0),
        (5.0, 6.0),
        (6.0, 6.0),
    )
    initial: tuple[float, ...] = (2.0, 1.0, 8.0, 5.0, 0.0)
    robot_cov: float = 0.0125
    opponent_cov: float = 0.00625
    pursuit_speed: float = 0.6
    n_rays: int = 8
    laser_noise_sd: float = 1.0
    robot_radius: float = 0.3
    opponent_radius: float = 0.3
    tag_radius: float = 0.5
    reward_tag: float = 10.0
    reward_failed_tag: float = -10.0
    reward_step: float = -1.0
    danger_centers: tuple[Pair, ...] = ((5.0, 3.0), (7.0, 1.0))
    danger_radius: float = 1.0
    danger_penalty: float = -300.0
    discount: float = 0.95
    horizon: int = 8
    gmm_components: int = 290
    gmm_component_ratio: float = 0.55
    gmm_seed: int = 0
    reward_noise_var: float = 0.25

    def validate(self) -> None:
        _positive(self, "robot_cov", "opponent_cov", "laser_noise_sd", "tag_radius", "danger_radius")
        w, h = self.arena
        for cx, cy in self.walls:
            if not (0 <= cx <= w - 1 and 0 <= cy <= h - 1):
                raise ConfigError(f"wall cell {(cx, cy)} outside the arena")


@dataclass(frozen=True)
class PushConfig:
    grid_size: Pair = (6.0, 6.0)
    initial: tuple[float, ...] = (0.5, 0.5, 1.0, 0.5, 5.0, 5.0)
    robot_cov: Pair = (0.005, 0.005)
    object_obs_sd: float = 0.1
    push_threshold: float = 1.0
    friction: float = 0.3
    max_push_force: float = 2.0
    robot_radius: float = 0.3
    danger_center: Pair = (5.0, 2.0)
    danger_radius: float = 1.0
    danger_penalty: float = -20.0
    discount: float = 0.95
    horizon: int = 9
    gmm_components: int = 7000
    gmm_component_ratio: float = 0.25
    gmm_seed: int = 0
    reward_noise_var: float = 25.0

    def validate(self) -> None:
        _positive(self, "object_obs_sd", "push_threshold", "max_push_force", "danger_radius")
        if not (0.0 < self.friction < 1.0):
            raise ConfigError("friction must lie in (0, 1)")


CONFIG_TYPES = {"light-dark": LightDarkConfig, "laser-tag": LaserTagConfig, "push": PushConfig}


def _positive(cfg, *names) -> None:
    for n in names:
        if getattr(cfg, n) <= 0:
            raise ConfigError(f"{n} must be positive")


def _tupleize(value):
    if isinstance(value, list):
        return tuple(_tupleize(v) for v in value)
    if isinstance(value, int) and not isinstance(value, bool):
        return value
    return value


def config_from_dict(name: str, doc: dict):
    if name not in CONFIG_TYPES:
        raise ConfigError(f"no configuration schema for {name!r}")
    cls = CONFIG_TYPES[name]
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(doc) - set(fields)
    if unknown:
        raise ConfigError(f"unknown {name} config fields: {sorted(unknown)}")
    kwargs = {}
    for key, val in doc.items():
        val = _tupleize(val)
        default = fields[key].default
        if isinstance(default, float) and isinstance(val, int):
            val = float(val)
        elif isinstance(default, tuple):
            val = _floatify(val, default)
        kwargs[key] = val
    cfg = cls(**kwargs)
    cfg.validate()
    return cfg


def _floatify(val, default):
    if isinstance(val, tuple) and default and isinstance(default[0], tuple):
        return tuple(tuple(float(x) for x in v) for v in val)
    if isinstance(val, tuple):
        return tuple(float(x) for x in val)
    return val


def data_path(filename: str) -> Path:
    return Path(str(resources.files("cvar_pomdp.environments") / "data" / filename))


def load_config(name: str, path: str | Path | None = None):
    """Load an environment config; the shipped file is used when ``path`` is None."""
    if name not in CONFIG_TYPES:
        raise ConfigError(f"no configuration file for {name!r}")
    p = Path(path) if path is not None else data_path(f"{name}.yaml")
    if not p.exists():
        raise ConfigError(f"config file {p} not found")
    doc = yaml.safe_load(p.read_text()) or {}
    return config_from_dict(name, doc)


def load_scripts(name: str, path: str | Path | None = None) -> dict[str, list[str]]:
    """Open-loop action scripts (``safe`` / ``dangerous``) for an environment."""
    p = Path(path) if path is not None else data_path("scripts.yaml")
    doc = yaml.safe_load(p.read_text())
    if name not in doc:
        raise ConfigError(f"no action scripts for {name!r}")
    return {k: list(v) for k, v in doc[name].items()}
