"""Exception types shared across the package."""


class GraphInputError(ValueError):
    """A node id is out of range or a graph construction input is malformed."""


class ConfigError(ValueError):
    """A configuration value is invalid or inconsistent with the data."""


class DataFormatError(ValueError):
    """An external file failed to parse or violated its schema."""


class ConnectivityError(ValueError):
    """The operation needs a connected graph; extract the largest component first."""


class IllegalActionError(ValueError):
    """The chosen action is not an edge out of the current message holder."""


class TrainingDiverged(RuntimeError):
    """Loss or gradients became non-finite.

    Carries the last finite parameter snapshot so the driver can still
    write a usable checkpoint.
    """

    def __init__(self, message, checkpoint=None):
        super().__init__(message)
        self.checkpoint = checkpoint
