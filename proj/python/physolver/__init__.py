"""Python bindings for the physolver library."""

from ._physolver import (
    ConfigError,
    Experiment,
    extrapolate_recursive,
    halton_stamps,
    load_config,
    presets,
    radical_inverse,
    reference_values,
    relative_l2,
    relative_linf,
    train,
    verify,
)

__all__ = [
    "ConfigError",
    "Experiment",
    "extrapolate_recursive",
    "halton_stamps",
    "load_config",
    "presets",
    "radical_inverse",
    "reference_values",
    "relative_l2",
    "relative_linf",
    "train",
    "verify",
]
