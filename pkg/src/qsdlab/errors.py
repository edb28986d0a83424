"""Typed exception hierarchy.

Validation errors signal bad inputs (CLI exit code 2); numerical errors signal
a computation that refused to produce an answer (CLI exit code 3).
"""


class QsdlabError(Exception):
    """Base class for all package errors."""


class ValidationError(QsdlabError):
    """Bad input: domain, schema, matrix shape, precondition."""


class NumericalError(QsdlabError):
    """A numerical procedure declined to return a result."""


# -- kernel construction ----------------------------------------------------

class InvalidDomain(ValidationError):
    pass


class NegativeDensity(ValidationError):
    pass


class RowSumExceedsOne(ValidationError):
    pass


class SchemaError(ValidationError):
    """Spec file does not match the documented schema."""


class NotApplicable(ValidationError):
    """Operation does not apply to this kernel family."""


class AllNodesEscape(NumericalError):
    """Every row has (numerically) zero mass; nothing survives two steps."""


# -- spectral extraction ----------------------------------------------------

class Reducible(NumericalError):
    """More than one communicating class among the non-escape nodes."""


class NoSpectralGapWithinTol(NumericalError):
    """No decisive separation between peripheral and subdominant moduli."""


class NonConvergent(NumericalError):
    """Power-iteration cross-check disagrees with the dense eigensolve."""


class PeriodMismatch(NumericalError):
    """Peripheral eigenvalue count disagrees with the graph period."""


class TolTooLoose(NumericalError):
    """Peripheral band caught eigenvalues off the root-of-unity angles."""


class DefectiveMatrix(NumericalError):
    """Peripheral eigenvalue appears non-diagonalizable; refusing to guess."""


class EscapeNode(ValidationError):
    pass


class DegenerateEigenfunction(NumericalError):
    pass


class ZeroEigenfunctionMass(ValidationError):
    """Starting measure has no overlap with the leading eigenfunction."""


# -- conditioned evolution --------------------------------------------------

class MassExtinct(NumericalError):
    """Raw survivor mass underflowed; use renormalize-each-step mode."""


class NotAperiodic(ValidationError):
    pass


class NotPeriodic(ValidationError):
    pass


class NotCyclic(NumericalError):
    """Cyclic class structure absent or broken by discretization."""


class SupportOverlap(NumericalError):
    """Phase clustering could not separate the peripheral supports."""

    def __init__(self, message, offending_nodes=()):
        super().__init__(message)
        self.offending_nodes = tuple(offending_nodes)


class NeverSubunit(NumericalError):
    """sup_x of the n-step survival mass never drops below one."""


# -- Monte Carlo ------------------------------------------------------------

class TooFewSurvivors(NumericalError):
    """Fewer than 100 paths survived; the conditional estimate is meaningless."""


# -- finite oracle ----------------------------------------------------------

class IllConditionedEigenbasis(NumericalError):
    pass
