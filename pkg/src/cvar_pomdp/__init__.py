"""CVaR bounds for POMDP policy evaluation under simplified observation models."""

__version__ = "0.1.0"
