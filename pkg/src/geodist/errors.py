"""Exception types raised across the package."""


class GeodistError(Exception):
    """Base class for all package errors."""


class PreconditionError(GeodistError, ValueError):
    """An argument violates the documented precondition of an operation."""


class ZeroRow(PreconditionError):
    def __init__(self, index):
        super().__init__(f"row {index} has (near) zero norm")
        self.index = index


class DimensionMismatch(PreconditionError):
    pass


class RankExceedsDim(PreconditionError):
    def __init__(self, rank, target_dim):
        super().__init__(f"numerical rank {rank} exceeds target dimension {target_dim}")
        self.rank = rank
        self.target_dim = target_dim


class NotPositiveSemidefinite(PreconditionError):
    pass


class ZeroGram(PreconditionError):
    pass


class PremiseViolated(PreconditionError):
    pass


class ConvergenceFailure(GeodistError, ArithmeticError):
    pass


class NearSingular(GeodistError, ArithmeticError):
    """The loss is not differentiable at the requested point."""
