"""Exception hierarchy shared by every module in the package."""

from __future__ import annotations


class FormationError(Exception):
    """Base class for all package errors."""


class ArgumentError(FormationError, ValueError):
    """A caller passed an argument outside the operation's domain."""


class GraphShapeError(FormationError):
    """The sensing graph lacks a structural property the operation needs."""


class ConstructionError(FormationError):
    """A DEP-induced graph could not be assembled from the given paths."""


class DecompositionError(FormationError):
    """The graph is not 2-rooted from the requested roots.

    ``witness`` is an agent that is not 2-reachable from the roots.
    """

    def __init__(self, message: str, witness: int | None = None) -> None:
        super().__init__(message)
        self.witness = witness


class SingularityError(FormationError):
    """A configuration or matrix is singular where full rank is required."""


class ManeuverabilityError(SingularityError):
    """The follower block of the Laplacian is singular.

    ``diagnostics`` lists ``(dep_index, axis, minor_order)`` for the first
    vanishing leading minor found in each failing dep/axis block.
    """

    def __init__(self, message: str, diagnostics: list | None = None) -> None:
        super().__init__(message)
        self.diagnostics = diagnostics or []


class SynthesisError(FormationError):
    """No stabilizing diagonal matrix could be produced."""

    def __init__(self, message: str, spectral_abscissa: float | None = None) -> None:
        super().__init__(message)
        self.spectral_abscissa = spectral_abscissa


class UnsupportedLengthError(SynthesisError):
    """Closed-form synthesis requested for a dep with more than two inner agents."""


class ConsistencyError(FormationError):
    """An internal cross-check between two equivalent computations failed."""


class DivergenceError(FormationError):
    """The integrated state became non-finite.

    ``time`` is the first sample time with a non-finite state and
    ``trajectory`` holds the samples recorded before it.
    """

    def __init__(self, message: str, time: float, trajectory=None) -> None:
        super().__init__(message)
        self.time = time
        self.trajectory = trajectory


class SceneFormatError(FormationError):
    """A scene or state file could not be parsed."""
