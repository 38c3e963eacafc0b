class DysaugError(Exception):
    """Base class for toolkit errors."""


class ValidationError(DysaugError, ValueError):
    """Bad input: malformed manifest, unknown enum value, degenerate audio."""


class AudioError(ValidationError):
    pass


class StageError(DysaugError, RuntimeError):
    def __init__(self, stage, cause):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
