"""Exception hierarchy shared by every solver module."""

from __future__ import annotations

from dataclasses import dataclass


class PersuasionError(Exception):
    """Base class for all library errors."""


@dataclass(frozen=True)
class Violation:
    code: str
    message: str

    def __str__(self) -> str:
        return f"{self.code}: {self.message}"


class InvalidInstance(PersuasionError, ValueError):
    """Raised by ``validate_instance``; carries every violated invariant."""

    def __init__(self, violations: list[Violation]):
        self.violations = list(violations)
        super().__init__("; ".join(str(v) for v in self.violations))

    @property
    def codes(self) -> set[str]:
        return {v.code for v in self.violations}


class InvalidScheme(PersuasionError, ValueError):
    pass


class DimensionMismatch(PersuasionError, ValueError):
    pass


class MissingResponse(PersuasionError, KeyError):
    pass


class SizeGuard(PersuasionError):
    """A combinatorial object would exceed its configured size cap."""


class SolverFailure(PersuasionError):
    """The LP backend returned a non-optimal status where an optimum must exist."""


class SeedInfeasible(SolverFailure):
    pass


class DeltaOutOfRange(PersuasionError, ValueError):
    pass


class BadSubsetSumInput(PersuasionError, ValueError):
    pass


class NoWitness(PersuasionError):
    pass
