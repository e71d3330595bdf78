"""Exception types shared across the pipeline."""


class ProvtraceError(Exception):
    """Base class for all package errors."""


class ParseError(ProvtraceError):
    """Malformed input line; carries the 1-based line number."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class SchemaError(ParseError):
    """Input line is well-formed but violates the record schema."""


class IntegrityError(ProvtraceError):
    """Stream-level contract violation (e.g. a node re-typed mid-stream)."""


class ContractError(ProvtraceError):
    """Caller violated an operation precondition."""


class DivergenceError(ProvtraceError):
    """Training produced NaN/Inf; signals a divergent learning rate."""


class ConfigError(ProvtraceError):
    """Invalid or inconsistent configuration."""


class MissingArtifactError(ProvtraceError):
    """A prerequisite stage artifact does not exist on disk."""

    def __init__(self, message: str, prerequisite: str | None = None):
        super().__init__(message)
        self.prerequisite = prerequisite
