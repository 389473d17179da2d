"""Exception hierarchy shared by every module of the package."""


class GenInvLabError(Exception):
    """Base class for all errors raised by geninv_lab."""


class ComplementError(GenInvLabError):
    """Two subspaces do not form a direct sum of the ambient space."""


class NeighborhoodError(GenInvLabError):
    """An operator lies outside the ball ``||T - A|| < ||A^+||^{-1}`` (minus margin)."""


class NotAGenInverse(GenInvLabError):
    """A matrix fails ``A X A = A`` or ``X A X = X``."""


class NoConvergence(GenInvLabError):
    """An iterative solver hit its iteration cap."""


class SingularJacobian(GenInvLabError):
    """A Newton step system is numerically singular."""


class NotCofinal(GenInvLabError):
    """A point lies outside the co-final set ``{x : M(x) (+) E_* = E}``."""


class DomainError(GenInvLabError):
    """A point lies outside the domain of a distribution family."""


class DimensionError(GenInvLabError):
    """A distribution changed dimension during a single integration run."""


class StepError(GenInvLabError):
    """A non-positive integration or grid step was requested."""


class ParseError(GenInvLabError):
    """An experiment config or serialized object is malformed."""


class UnknownExperiment(GenInvLabError):
    """The requested experiment name is not registered."""
