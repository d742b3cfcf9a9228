"""Exception hierarchy.

Every error belongs to one family; the CLI maps families to exit codes.
"""


class LivsicError(Exception):
    """Base class for all package errors."""

    exit_code = 1


# -- torus dynamics -----------------------------------------------------------
class DynamicsError(LivsicError):
    exit_code = 4


class NotUnimodular(DynamicsError):
    pass


class EigenvalueOnUnitCircle(DynamicsError):
    pass


class DefectiveSplittingUnsupported(DynamicsError):
    pass


class PerturbationTooLarge(DynamicsError):
    pass


class NoConvergence(DynamicsError):
    pass


# -- precision / budgets -------------------------------------------------------
class BudgetError(LivsicError):
    exit_code = 5


class PrecisionExhausted(BudgetError):
    pass


class OrbitBudgetExceeded(BudgetError):
    pass


class ResolutionExceeded(BudgetError):
    pass


# -- closing lemma -------------------------------------------------------------
class ClosingError(LivsicError):
    exit_code = 6


class NotClose(ClosingError):
    pass


class AmbiguousLatticeShift(ClosingError):
    pass


# -- group numerics ------------------------------------------------------------
class GroupError(LivsicError):
    exit_code = 7


class VariantMismatch(GroupError):
    pass


class SingularInverse(GroupError):
    pass


class LogBranchFailure(GroupError):
    pass


class NewtonStall(GroupError):
    pass


class StepTooLarge(GroupError):
    pass


class SingularRestriction(GroupError):
    pass


class NotADiffeomorphism(GroupError):
    """Lift derivative 1 + u' drops below the orientation margin."""


# -- solver --------------------------------------------------------------------
class SolverError(LivsicError):
    exit_code = 8


class CoverageTooCoarse(SolverError):
    pass


class ObstructionFails(SolverError):
    """Raised only by callers that insist on a vanishing obstruction."""

    exit_code = 3


# -- reporting -----------------------------------------------------------------
class ConfigParse(LivsicError):
    exit_code = 2


class MissingSeries(LivsicError):
    exit_code = 9
