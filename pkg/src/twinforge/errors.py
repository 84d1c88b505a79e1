"""Exception types raised across the package.

Every error carries a short machine-readable ``code`` so the CLI can map
failures to exit codes and reports can log them without string matching.
"""


class TwinForgeError(Exception):
    code = "ERROR"


class ValidationError(TwinForgeError, ValueError):
    """Input violates a documented precondition or invariant."""

    code = "VALIDATION_FAILURE"


class InvalidConfig(ValidationError):
    code = "INVALID_CONFIG"


class DurationTooShort(ValidationError):
    code = "DURATION_TOO_SHORT"


class OutOfRange(ValidationError):
    code = "OUT_OF_RANGE"


class UnstableTimestep(ValidationError):
    code = "UNSTABLE_TIMESTEP"


class InvalidDimension(ValidationError):
    code = "INVALID_DIMENSION"


class ShapeMismatch(ValidationError):
    code = "SHAPE_MISMATCH"


class GridMismatch(ValidationError):
    code = "GRID_MISMATCH"


class EmptyScenarios(ValidationError):
    code = "EMPTY_SCENARIOS"


class EmptyGroup(ValidationError):
    code = "EMPTY_GROUP"


class ZeroReference(ValidationError):
    code = "ZERO_REFERENCE"


class ConstantReference(ValidationError):
    code = "CONSTANT_REFERENCE"


class MissingJumps(ValidationError):
    code = "MISSING_JUMPS"


class KTooLarge(ValidationError):
    code = "K_TOO_LARGE"


class DegenerateRange(ValidationError):
    code = "DEGENERATE_RANGE"


class ConstantInput(ValidationError):
    code = "CONSTANT_INPUT"


class LengthMismatch(ValidationError):
    code = "LENGTH_MISMATCH"


class MissingRom(ValidationError):
    code = "MISSING_ROM"


class ConfigInvalid(ValidationError):
    code = "CONFIG_INVALID"


class NonfiniteState(TwinForgeError, ArithmeticError):
    code = "NONFINITE_STATE"


class StoreError(TwinForgeError):
    code = "STORE_ERROR"


class DuplicateId(StoreError):
    code = "DUPLICATE_ID"


class NotFound(StoreError, KeyError):
    code = "NOT_FOUND"

    def __str__(self):
        return Exception.__str__(self)


class ParseFailure(StoreError):
    code = "PARSE_FAILURE"

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class IOFailure(StoreError, OSError):
    code = "IO_FAILURE"


class StoreLocked(StoreError):
    code = "STORE_LOCKED"


class VersionMismatch(TwinForgeError):
    code = "VERSION_MISMATCH"


class StageFailure(TwinForgeError):
    code = "STAGE_FAILURE"

    def __init__(self, stage, message):
        super().__init__(f"stage {stage}: {message}")
        self.stage = stage
