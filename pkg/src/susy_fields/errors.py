"""Exception types raised across the package."""


class SusyFieldsError(Exception):
    """Base class for every error raised by susy_fields."""


class InvalidArgumentError(SusyFieldsError, ValueError):
    pass


class NumericalFailureError(SusyFieldsError, RuntimeError):
    pass


class NodelessViolationError(SusyFieldsError, ValueError):
    """A function required to be nodeless (seed or w) changes sign or vanishes."""

    def __init__(self, message, location=None):
        super().__init__(message)
        self.location = location


class DeletedLevelError(SusyFieldsError, ValueError):
    """The requested energy is the level removed by the transformation."""


class DegenerateDensityError(SusyFieldsError, ValueError):
    pass


class InvalidKernelError(SusyFieldsError, ValueError):
    pass


class UnderResolvedError(SusyFieldsError, ValueError):
    pass


class ConfigurationError(SusyFieldsError, ValueError):
    def __init__(self, message, path=""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


class IngestionError(SusyFieldsError, ValueError):
    def __init__(self, message, row=None):
        super().__init__(f"row {row}: {message}" if row is not None else message)
        self.row = row
