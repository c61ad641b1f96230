"""Exception hierarchy shared by all modules."""


class DissipError(Exception):
    """Base class for every error raised by this package."""


class InputError(DissipError, ValueError):
    """Malformed or inconsistent input (shapes, ranges, schema)."""


class DomainError(DissipError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class InstabilityError(DissipError):
    """A matrix expected to be Schur stable is not."""


class ConvergenceError(DissipError):
    """An iterative scheme did not reach its tolerance."""


class StabilizabilityError(ConvergenceError):
    """The Riccati recursion diverged or left the closed loop unstable."""


class CertificationError(DissipError):
    """A certificate cannot be built or one of its inequalities failed."""


class UniquenessError(ConvergenceError):
    """The closed-loop chain has no unique limiting distribution."""


class MultichainError(ConvergenceError):
    """Relative value iteration failed to converge (non-unichain model)."""


class DivergenceError(ConvergenceError):
    """A bias series does not converge."""


class NoSolutionError(DissipError):
    """No admissible policy exists."""


class SizeError(DissipError):
    """An exhaustive enumeration would exceed its guard."""


class NotApplicableError(DissipError):
    """A check is vacuous for the given input."""
