"""Exception hierarchy shared across the package."""


class CrossgraftError(Exception):
    """Base class for all package errors."""


class ConfigError(CrossgraftError):
    """Invalid configuration value; message names the offending key."""


class ContractError(CrossgraftError):
    """A caller violated an operation precondition (shape, range, domain tag)."""


class DataError(CrossgraftError):
    """Dataset files missing or corrupt; message names the path."""


class CheckpointError(CrossgraftError):
    """Checkpoint unreadable: version mismatch or checksum failure."""


class DivergenceError(CrossgraftError):
    """A training loss went non-finite; message names phase and component."""

    def __init__(self, phase: str, component: str, value: float):
        self.phase = phase
        self.component = component
        self.value = value
        super().__init__(
            f"non-finite loss in phase '{phase}': component '{component}' = {value!r}"
        )
