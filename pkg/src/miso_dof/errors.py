"""Error types shared across the planner and simulator modules."""


class MisoDofError(Exception):
    """Base class for all package errors."""


class ValidationError(MisoDofError):
    """Malformed or out-of-contract input (CLI exit code 2)."""


class InfeasibleError(MisoDofError):
    """Structurally infeasible request (CLI exit code 3)."""


class RangeViolation(ValidationError):
    """An exponent falls outside 0 <= alpha_t <= beta_t <= 1."""


class LengthMismatch(ValidationError):
    """Exponent sequences of unequal length."""


class TargetUnachievable(InfeasibleError):
    """Requested DoF target lies outside the achievable range."""


class CornerInactive(InfeasibleError):
    """Requested corner is not active for the given averages."""


#: Alias used by experiment-harness callers: an experiment pinned to a corner
#: that the planner reports inactive is an infeasible experiment.
InfeasibleCorner = CornerInactive


class Infeasible(InfeasibleError):
    """No allocation satisfies the constraint set."""


class DeltaBarTooLarge(InfeasibleError):
    """delta_bar exceeds the common-capacity bound (Delta_com < 0)."""


class RateUnderflow(InfeasibleError):
    """P too small to carry at least one bit per real dimension."""


class IndexOutOfRange(ValidationError):
    """Message index outside the constellation."""


class TooLargeToEnumerate(ValidationError):
    """Exact enumeration was requested over more than 2^20 pairs."""


class BitOverflow(InfeasibleError):
    """Bit load exceeds hard capacity of the common stream."""


class DegenerateGrid(ValidationError):
    """Slope fit requested on fewer than three distinct SNR points."""
