"""Exception types shared across the package."""


class DocTunerError(Exception):
    """Base class for all package errors."""


class ShapeError(DocTunerError, ValueError):
    """Operands have incompatible dimensions."""


class ValidationError(DocTunerError, ValueError):
    """An input violates a documented precondition."""


class InvariantError(DocTunerError, RuntimeError):
    """Internal state broke an invariant (bug or corrupted state)."""


class CheckpointError(DocTunerError, ValueError):
    """Checkpoint bytes are malformed; ``offset`` is the failing byte position."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte {offset})")
        self.offset = offset


class DivergenceError(DocTunerError, RuntimeError):
    """Training produced non-finite values."""
