"""Exception taxonomy shared across the toolkit.

Two exit-code families: InputError maps to CLI exit 1 (bad files, bad
configuration, contract misuse), NumericalError maps to exit 2 (the data
defeated an estimator).
"""


class OpresponseError(Exception):
    """Base class for all toolkit errors."""


class InputError(OpresponseError):
    """User-supplied data or configuration is unusable."""


class LoadError(InputError):
    """A file could not be parsed; carries row/column context."""

    def __init__(self, message: str, *, path=None, row=None, column=None):
        ctx = []
        if path is not None:
            ctx.append(str(path))
        if row is not None:
            ctx.append(f"row {row}")
        if column is not None:
            ctx.append(f"column {column!r}")
        suffix = f" ({', '.join(ctx)})" if ctx else ""
        super().__init__(message + suffix)
        self.path = path
        self.row = row
        self.column = column


class ConfigError(InputError):
    """A required configuration value is missing or inconsistent."""


class ContractError(InputError):
    """An operation was called outside its documented preconditions."""


class ExtractionError(InputError):
    """A metric rule could not run because a required series is absent."""

    def __init__(self, variable: str, message: str = ""):
        detail = message or "required series missing from session log"
        super().__init__(f"{variable}: {detail}")
        self.variable = variable


class NumericalError(OpresponseError):
    """An estimator failed on the given data."""


class SeparationError(NumericalError):
    """Logistic fit diverged: the classes are (quasi-)separable."""


class CollinearityError(NumericalError):
    """Design matrix is rank deficient; names the implicated features."""

    def __init__(self, features):
        self.features = list(features)
        super().__init__(
            "rank-deficient design; linearly dependent features: "
            + ", ".join(self.features)
        )


class DegenerateInputError(NumericalError):
    """A test statistic is undefined for the given samples."""


class StratificationError(InputError):
    """A class has too few members for the requested test allocation."""
