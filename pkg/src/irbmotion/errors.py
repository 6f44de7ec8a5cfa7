"""Exception types shared across the package."""


class ShapeError(ValueError):
    """Operands have incompatible or invalid shapes."""


class ConfigError(ValueError):
    """A model or run configuration is internally inconsistent."""


class DataFormatError(ValueError):
    """An input file does not match its documented format."""


class CheckpointError(ValueError):
    """A checkpoint file is malformed or inconsistent with its config."""


class TrainingDiverged(RuntimeError):
    """The training loss became non-finite."""
