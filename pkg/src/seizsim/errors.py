"""Exception hierarchy shared by every subpackage."""


class SeizSimError(Exception):
    """Base class for all library errors."""


class ConfigurationError(SeizSimError, ValueError):
    pass


class FormatError(SeizSimError):
    """Malformed or corrupted binary file. ``offset`` is the byte position."""

    def __init__(self, message, offset):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class InsufficientDataError(SeizSimError):
    pass


class ShapeError(SeizSimError, ValueError):
    def __init__(self, layer, expected, actual):
        super().__init__(f"shape mismatch in layer {layer!r}: expected {expected}, got {actual}")
        self.layer = layer
        self.expected = expected
        self.actual = actual


class NumericError(SeizSimError, ArithmeticError):
    pass


class TrainingError(SeizSimError):
    def __init__(self, message, epoch):
        super().__init__(f"{message} (epoch {epoch})")
        self.epoch = epoch


class AlignmentError(SeizSimError, ValueError):
    pass


class UndefinedMetricError(SeizSimError, ZeroDivisionError):
    pass


class CapacityError(SeizSimError):
    pass


class DecodeError(SeizSimError):
    pass


class ScenarioError(SeizSimError):
    pass


class DependencyError(SeizSimError):
    """A pipeline stage ran before the stage that produces its inputs."""

    def __init__(self, missing_stage, path):
        super().__init__(f"missing {path}; run the '{missing_stage}' stage first")
        self.missing_stage = missing_stage
        self.path = path
