"""Exception hierarchy shared by all modules.

Input problems derive from :class:`InputError`; numerical breakdowns
(vanishing determinants, unmet non-degeneracy hypotheses, quadrature that
does not converge) derive from :class:`NumericalError`.  The command line
front end maps the two families to different exit codes.
"""


class ArtifactError(Exception):
    """Root of the package's exceptions."""


class InputError(ArtifactError, ValueError):
    """Invalid argument, weight description or request."""


class DomainError(InputError):
    """Evaluation requested at a point where the object is not defined."""


class GenericConditionError(InputError):
    """A zero coincides with a pole, or a list repeats an entry."""


class ShapeError(InputError):
    """Degree or index range incompatible with the request."""


class NumericalError(ArtifactError, ArithmeticError):
    """A numerical quantity required by a formula vanished or diverged."""


class AccuracyError(NumericalError):
    """Quadrature failed to reach the requested tolerance."""


class ExistenceError(NumericalError):
    """A Toeplitz determinant is below the existence threshold."""


class DegeneracyError(NumericalError):
    """A hypothesis of the form 'X != 0' failed numerically."""


class InapplicableError(DegeneracyError):
    """The relation presumes a nonvanishing quantity that is zero here."""


class ConsistencyError(NumericalError):
    """Two independent evaluations of the same quantity disagree."""
