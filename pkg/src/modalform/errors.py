"""Exception and warning types used across the package."""


class ModalFormError(Exception):
    """Base class for all modalform errors."""


class InvalidParameterError(ModalFormError, ValueError):
    """An argument violates an operation's preconditions."""


class AssemblyError(ModalFormError):
    """Operator assembly failed, typically on a degenerate element."""


class EigenSolverError(ModalFormError):
    """The generalized eigenvalue solve failed; message carries diagnostics."""


class InvalidBasisError(ModalFormError):
    """A modal basis violates its structural invariants (e.g. zero column)."""


class UndefinedCorrelationError(ModalFormError):
    """Pearson correlation requested on a zero-variance signature."""


class InterpolationFailureError(ModalFormError):
    """Restricted projection matrix is numerically rank deficient."""


class IngestionError(ModalFormError):
    """A point-cloud file could not be matched to the nominal geometry."""


class ConfigError(ModalFormError, ValueError):
    """Pipeline configuration is malformed or inconsistent."""


class IllConditionedWarning(UserWarning):
    """Projection system condition number exceeds the reporting threshold."""
