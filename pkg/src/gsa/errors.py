"""Exception hierarchy shared by all gsa modules."""


class GSAError(Exception):
    """Base class for every error raised by gsa."""


class ParameterError(GSAError, ValueError):
    """A distribution or method parameter is outside its domain."""


class DesignError(GSAError, ValueError):
    """A sampling design cannot be built or is inconsistent with its use."""


class SchemaError(GSAError, ValueError):
    """Column names, output names or file layouts do not match."""


class ModelDomainError(GSAError, ValueError):
    """A model was asked to evaluate a point outside its domain."""


class ExternalModelError(GSAError):
    """An external simulator exited with a nonzero status."""

    def __init__(self, message: str, returncode: int, stderr: str = ""):
        super().__init__(message)
        self.returncode = returncode
        self.stderr = stderr


class ProtocolError(GSAError):
    """An external simulator broke the CSV exchange protocol."""

    def __init__(self, message: str, expected: int | None = None, actual: int | None = None):
        super().__init__(message)
        self.expected = expected
        self.actual = actual


class CollinearityError(GSAError, ValueError):
    """A regression basis is rank deficient."""

    def __init__(self, message: str, columns: list[str] | None = None):
        super().__init__(message)
        self.columns = columns or []


class UndefinedIndexError(GSAError, ValueError):
    """A sensitivity measure is undefined, typically because a variance is zero."""


class IncompleteDesignError(GSAError, ValueError):
    """Evaluations are missing for some rows of a structured design."""
