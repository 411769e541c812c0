"""Exception types shared across the package."""


class TreedualError(Exception):
    """Base class for all package errors."""


class MalformedTree(TreedualError):
    """Tree construction input violates a structural invariant."""


class DomainError(TreedualError):
    """Argument outside the mathematical domain of an evaluation."""


class NumericalFailure(TreedualError):
    """A solver stalled or exceeded its iteration budget."""


class InfeasibleProblem(TreedualError):
    """The requested optimization problem has no feasible point."""


class NoArbitrageViolation(TreedualError):
    """No strictly positive martingale density exists for the scenario.

    Carries a ``certificate`` dict with the max-min LP outcome (best
    deflator found, its minimum node value, and row duals whose
    neutrality components encode an arbitrage portfolio direction).
    """

    def __init__(self, message, certificate=None):
        super().__init__(message)
        self.certificate = certificate or {}


class DegenerateValue(TreedualError):
    """The optimum forces zero consumption on positive clock mass while
    the utility is unbounded below at zero; the value is minus infinity."""

    value = float("-inf")


class ExtensionFailure(TreedualError):
    """Deflator extension residuals exceed tolerance (primal solve not
    converged tightly enough to reconstruct the dual process)."""


class GridGuard(TreedualError):
    """Brute-force grid size guard tripped."""


class StepTooLarge(TreedualError):
    """A finite-difference perturbation left the interior of the
    superreplication cone."""
