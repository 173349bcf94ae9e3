"""Exception hierarchy.

Every error raised by the library derives from :class:`LeaderSelectError` so the
CLI can map it onto an exit code with a single ``except`` clause.
"""


class LeaderSelectError(Exception):
    """Base class for all library errors."""

    code = "error"


class ValidationError(LeaderSelectError, ValueError):
    """Input violates a documented precondition."""

    code = "validation"


class InfeasibleError(LeaderSelectError):
    """A well-formed request has no admissible answer."""

    code = "infeasible"


# graph-core
class DuplicateEdge(ValidationError):
    code = "duplicate_edge"


class SelfLoop(ValidationError):
    code = "self_loop"


class NonPositiveVariance(ValidationError):
    code = "non_positive_variance"


class NodeOutOfRange(ValidationError):
    code = "node_out_of_range"


class Disconnected(ValidationError):
    code = "disconnected"


class EmptyLeaderSet(ValidationError):
    code = "empty_leader_set"


class DuplicateLeader(ValidationError):
    code = "duplicate_leader"


class GraphFormatError(ValidationError):
    code = "graph_format"


# error-metric / walk-oracle
class AlreadyLeader(ValidationError):
    code = "already_leader"


class LeaderTarget(ValidationError):
    code = "leader_target"


class WalkTimeout(LeaderSelectError):
    code = "walk_timeout"


# selection
class InvalidK(ValidationError):
    code = "invalid_k"


class InfeasibleBudget(InfeasibleError):
    """Carries the best-effort selection in :attr:`result`."""

    code = "infeasible_budget"

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class AllSamplesDisconnected(InfeasibleError):
    code = "all_samples_disconnected"


class DimensionMismatch(ValidationError):
    code = "dimension_mismatch"


class BruteForceTooLarge(LeaderSelectError):
    code = "brute_force_too_large"


# noise-sim
class UnstableStep(ValidationError):
    code = "unstable_step"


class InconsistentOffsets(ValidationError):
    code = "inconsistent_offsets"


# bench-harness / cli
class CannotConnect(InfeasibleError):
    code = "cannot_connect"


class UnknownExperiment(ValidationError):
    code = "unknown_experiment"
