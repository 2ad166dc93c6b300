"""Unsupervised domain adaptation by cross-grafting the decoder stacks of
two shared-latent VAEs and adversarially aligning the generated transition
images onto the source label space.
"""

__version__ = "0.1.0"

from .config import ArchConfig, DataConfig, HParams, RunConfig, resolve_config
from .errors import (
    CheckpointError,
    ConfigError,
    ContractError,
    CrossgraftError,
    DataError,
    DivergenceError,
)
from .grafting import StackSplit
from .model import TransitionModel

__all__ = [
    "ArchConfig",
    "DataConfig",
    "HParams",
    "RunConfig",
    "resolve_config",
    "StackSplit",
    "TransitionModel",
    "CrossgraftError",
    "ConfigError",
    "ContractError",
    "DataError",
    "CheckpointError",
    "DivergenceError",
    "__version__",
]
