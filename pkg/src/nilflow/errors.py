"""Exception hierarchy shared by every nilflow module."""

from __future__ import annotations


class NilflowError(Exception):
    """Base class for all nilflow errors."""


class CoordinateMismatchError(NilflowError, ValueError):
    """Two objects live on different coordinate systems."""


class DimensionMismatchError(NilflowError, ValueError):
    """A vector or matrix has the wrong size."""


class NotNilpotentError(NilflowError):
    """An observable did not reach zero within the allowed number of Lie derivatives."""

    def __init__(self, observable, max_depth: int):
        self.observable = observable
        self.max_depth = max_depth
        super().__init__(f"observable {observable} is not nilpotent within depth {max_depth}")


class SingularityError(NilflowError, ArithmeticError):
    """A reduced right-hand side was evaluated on its singular locus.

    ``kind`` is ``"COLLISION_SINGULARITY"`` for q1 == q2 and ``"SINGULARITY"``
    otherwise. ``t`` is filled in by the integrator when known.
    """

    def __init__(self, kind: str = "SINGULARITY", message: str = "", t: float | None = None):
        self.kind = kind
        self.t = t
        super().__init__(message or kind)


class SpecError(NilflowError, ValueError):
    """Malformed system specification; ``code`` is a stable machine-readable tag."""

    def __init__(self, code: str, message: str):
        self.code = code
        super().__init__(f"{code}: {message}")


class UnknownCoordinateError(SpecError):
    def __init__(self, name: str):
        self.name = name
        super().__init__("UNKNOWN_COORDINATE", repr(name))
