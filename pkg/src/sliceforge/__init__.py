"""Closed-loop RAN slicing simulator with RL and baseline PRB allocators."""

from .domain import (SLICES, ScenarioConfig, SliceKind, UeProfile, default_scenario, rng_substream,
                     validate_scenario)

__version__ = "0.1.0"

__all__ = ["SLICES", "ScenarioConfig", "SliceKind", "UeProfile", "default_scenario", "rng_substream",
           "validate_scenario", "__version__"]
