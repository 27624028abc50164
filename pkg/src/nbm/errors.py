"""Exception hierarchy shared by every module."""


class NbmError(Exception):
    pass


class ConfigError(NbmError):
    pass


class ShapeError(NbmError, ValueError):
    pass


class NumericError(NbmError, FloatingPointError):
    """Raised when a forward or backward pass produces NaN/Inf.

    ``network`` names the offending parameter network (``"theta"``, ``"phi"``
    or ``"psi"``) when it is known.
    """

    def __init__(self, message, network=None):
        super().__init__(message)
        self.network = network


class CapacityError(NbmError):
    pass


class DataError(NbmError, ValueError):
    pass


class FormatError(NbmError):
    pass


class LengthError(FormatError):
    pass


class CheckpointError(NbmError):
    pass


class CorruptCheckpointError(CheckpointError):
    pass


class VersionError(CheckpointError):
    pass
