"""Exception hierarchy.

Failures fall in three families that the CLI maps onto exit codes:
usage/range problems (1), violated mathematical preconditions (2) and
numerical failures (3).
"""


class FoldcrestError(Exception):
    """Base class for every error raised by the package."""

    exit_code = 1


class OutOfRange(FoldcrestError, ValueError):
    """An argument lies outside the domain where a formula is defined."""


class MathPreconditionError(FoldcrestError):
    exit_code = 2


class StabilityViolation(MathPreconditionError):
    """The stability quantity D = F_y*G1_x + F_z*G2_x is not negative."""


class DegenerateFold(MathPreconditionError):
    """F_xx (or another fold denominator) vanishes."""


class DegenerateCoefficients(MathPreconditionError):
    """One of kappa, alpha2, beta1, beta2 vanishes."""


class NegativeDiscriminant(MathPreconditionError):
    """alpha2*beta1 <= 0, so no positive J0 solves the doubling condition."""


class NumericalError(FoldcrestError):
    exit_code = 3


class NonFiniteEvaluation(NumericalError):
    """A right-hand side returned NaN or inf."""


class NoConvergence(NumericalError):
    pass


class StepUnderflow(NumericalError):
    pass


class MaxTimeExceeded(NumericalError):
    pass


class NoReturn(NumericalError):
    """The trajectory never came back to the section."""


class TangentialCrossing(NumericalError):
    pass


class ComplexPair(NumericalError):
    pass


class NoOrbit(NumericalError):
    pass


class BracketInvalid(NumericalError):
    pass


class Escaped(NumericalError):
    """The state left the admissible ball ``|y| <= max_norm``."""
