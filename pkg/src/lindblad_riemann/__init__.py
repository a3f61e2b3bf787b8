"""Riemannian optimization of layered Kraus channels approximating Lindbladian dynamics."""

from .exceptions import (
    ChannelError,
    ConfigError,
    DegenerateObjectiveError,
    LindbladRiemannError,
    MemoryCapError,
    NumericError,
)

__version__ = "0.1.0"

__all__ = [
    "ChannelError",
    "ConfigError",
    "DegenerateObjectiveError",
    "LindbladRiemannError",
    "MemoryCapError",
    "NumericError",
]
