"""Exception types raised across the pipeline."""


class PoremineError(Exception):
    """Base class for all package errors."""


class InputError(PoremineError):
    """Problems with files handed to the pipeline (CLI exit code 2)."""


class FileUnreadable(InputError):
    pass


class UnsupportedFormat(InputError):
    pass


class ArgumentError(PoremineError):
    """Invalid parameter values (CLI exit code 3)."""


class InvalidScale(ArgumentError):
    pass


class BadK(ArgumentError):
    pass


class UnknownFeature(ArgumentError):
    pass


class MatrixEmpty(ArgumentError):
    pass


class LengthMismatch(ArgumentError):
    pass


class DimensionMismatch(ArgumentError):
    pass


class BadSeparation(ArgumentError):
    pass


class SpecError(ArgumentError):
    pass


class LabelError(InputError):
    pass


class UnknownPoreId(LabelError):
    pass


class DuplicateLabel(LabelError):
    pass


class InvalidLabelValue(LabelError):
    pass


class DegenerateError(PoremineError):
    """Analytic degeneracy in the data (CLI exit code 4)."""


class DegenerateHistogram(DegenerateError):
    pass


class DegeneratePore(DegenerateError):
    pass


class ConstantFeature(DegenerateError):
    def __init__(self, name):
        super().__init__(f"feature {name!r} has zero variance")
        self.name = name


class DegenerateSample(DegenerateError):
    pass


class StageError(PoremineError):
    """Wraps an error raised inside a pipeline stage, naming the stage."""

    def __init__(self, stage, cause):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause
