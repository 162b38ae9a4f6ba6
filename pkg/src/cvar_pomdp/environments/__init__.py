"""Benchmark POMDPs, each in an original (GMM noise) and simplified (Gaussian noise) variant."""

from __future__ import annotations

from ..errors import InvalidInputError
from ..pomdp_core import SIMPLIFIED, PomdpModel
from .config import (
    CONFIG_TYPES,
    LaserTagConfig,
    LightDarkConfig,
    PushConfig,
    config_from_dict,
    load_config,
    load_scripts,
)
from .gmm import MatchedGmm, normal_logpdf
from .laser_tag import LaserTag
from .light_dark import LightDark
from .push import Push
from .toy_chain import (
    ToyChain,
    ToyChainConfig,
    enumerate_epsilon,
    enumerate_return_distribution,
)

ENVIRONMENTS = {
    "light-dark": LightDark,
    "laser-tag": LaserTag,
    "push": Push,
    "toy-chain": ToyChain,
}


def make_environment(name: str, variant: str = SIMPLIFIED, config=None, config_path=None) -> PomdpModel:
    """Construct an environment by name.

    ``config`` may be a config dataclass or a plain dict; otherwise the YAML at
    ``config_path`` (or the shipped default) is used.
    """
    if name not in ENVIRONMENTS:
        raise InvalidInputError(f"unknown environment {name!r}; choose from {sorted(ENVIRONMENTS)}")
    cls = ENVIRONMENTS[name]
    if name == "toy-chain":
        if isinstance(config, dict):
            config = ToyChainConfig(**config)
        return cls(config, variant=variant)
    if isinstance(config, dict):
        config = config_from_dict(name, config)
    elif config is None:
        config = load_config(name, config_path)
    return cls(config, variant=variant)


__all__ = [
    "CONFIG_TYPES",
    "ENVIRONMENTS",
    "LaserTag",
    "LaserTagConfig",
    "LightDark",
    "LightDarkConfig",
    "MatchedGmm",
    "Push",
    "PushConfig",
    "ToyChain",
    "ToyChainConfig",
    "config_from_dict",
    "enumerate_epsilon",
    "enumerate_return_distribution",
    "load_config",
    "load_scripts",
    "make_environment",
    "normal_logpdf",
]
