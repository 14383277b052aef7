"""Exception hierarchy shared by all modules."""


class ParabolicaError(Exception):
    """Base class for every error raised by the package."""


class InvalidConfiguration(ParabolicaError, ValueError):
    pass


class CollisionEvaluation(ParabolicaError, ArithmeticError):
    """A potential was evaluated (numerically) at one of the centres."""


class CertificationFailure(ParabolicaError):
    pass


class DomainError(ParabolicaError, ValueError):
    pass


class NoSolution(ParabolicaError):
    pass


class NoSolutionInClass(NoSolution):
    """The requested rotation class admits no parabolic arc."""


class DegenerateEndpoints(ParabolicaError, ValueError):
    pass


class DegenerateRectilinear(ParabolicaError, ValueError):
    pass


class DegeneratePath(ParabolicaError, ValueError):
    pass


class DegenerateDirections(ParabolicaError, ValueError):
    pass


class CollisionPath(ParabolicaError):
    """A discrete path touches the collision set."""


class UnresolvedDegree(ParabolicaError):
    pass


class NumericalError(ParabolicaError, RuntimeError):
    pass


class CollisionEncountered(ParabolicaError):
    def __init__(self, message, candidate=None):
        super().__init__(message)
        self.candidate = candidate


class NotConverged(ParabolicaError):
    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class DegreeBroken(ParabolicaError):
    pass


class IndexViolation(ParabolicaError):
    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


class InsufficientTail(ParabolicaError, ValueError):
    pass


class HypothesisViolation(ParabolicaError):
    def __init__(self, message, series=None):
        super().__init__(message)
        self.series = series or {}
