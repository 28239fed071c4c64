"""Errors raised by the freesets library.

Management commands turn every FreesetsError into a CommandError, so the
exit code is nonzero exactly when one of these escapes.
"""


class FreesetsError(Exception):
    """Base class for all library errors."""


class UnsupportedGroup(FreesetsError):
    pass


class InvalidLevel(FreesetsError):
    pass


class InvalidExpression(FreesetsError):
    """A sequence or cone expression could not be parsed."""


class NonUniqueExtension(FreesetsError):
    pass


class NotExtendable(FreesetsError):
    """The projection constraint has no equivariant solution at the target level."""


class SolverDiverged(FreesetsError):
    pass


class SolverError(FreesetsError):
    """A conic solve did not end with an optimal status."""

    def __init__(self, status, message=''):
        self.status = status
        super().__init__(message or f'solver returned status {status!r}')


class Infeasible(SolverError):
    pass


class Unbounded(SolverError):
    pass


class NumericalFailure(SolverError):
    pass


class Indeterminate(FreesetsError):
    """Membership could not be decided because the solver failed."""


class InvalidTarget(FreesetsError):
    pass


class EmptyBasis(FreesetsError):
    pass


class AllRestartsFailed(FreesetsError):
    pass


class DegenerateSample(FreesetsError):
    pass


class NonInvariantData(FreesetsError):
    pass


class NonInvariantSupport(FreesetsError):
    pass


class ConfigError(FreesetsError):
    """Invalid config, dataset or description file; messages carry line numbers."""


class InvalidDescription(FreesetsError):
    """Description data fails its equivariance, invariance or morphism checks."""
