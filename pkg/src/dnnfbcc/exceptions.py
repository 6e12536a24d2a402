"""Exception types raised across the package."""


class ConfigurationError(ValueError):
    """Invalid parameters, shapes, or incompatible components."""


class NumericError(ArithmeticError):
    """A non-finite value appeared during a computation."""

    def __init__(self, message, layer=None):
        super().__init__(message)
        self.layer = layer


class FormatError(ValueError):
    """A file does not follow its declared binary or text layout."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class ManifestError(ValueError):
    """A manifest row failed validation."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class EvaluationError(ValueError):
    """Scores are insufficient to compute an error rate."""
