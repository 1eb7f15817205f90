"""Exception hierarchy.

Two top-level families so callers (CLI, service) can map failures to exit
codes / HTTP status without string matching:

* DataError      -- the input data or configuration is malformed or violates a
                    stated precondition (bad file, bad window, non-still rest).
* NumericalError -- the computation itself failed (rank deficiency, degenerate
                    geometry, integrator blowup).
"""

from __future__ import annotations

__all__ = [
    "TumblefitError",
    "DataError",
    "FormatError",
    "WindowError",
    "RestWindowError",
    "NumericalError",
    "RankDeficiencyError",
    "DegenerateProofError",
    "DegenerateAxesError",
    "IntegrationError",
]


class TumblefitError(Exception):
    """Base class for all package errors."""


class DataError(TumblefitError):
    """Input data or configuration is invalid."""


class FormatError(DataError):
    """A file could not be parsed or fails its schema."""


class WindowError(DataError):
    """A sample window is out of bounds, too short, or undetectable."""


class RestWindowError(DataError):
    """The rest window fails the stillness precondition."""


class NumericalError(TumblefitError):
    """A numerical procedure failed."""


class RankDeficiencyError(NumericalError):
    """Least-squares stack is rank deficient.

    `null_directions` lists the unobservable parameter combinations by name.
    """

    def __init__(self, message: str, null_directions: list[str] | None = None):
        super().__init__(message)
        self.null_directions = null_directions or []


class DegenerateProofError(NumericalError):
    """The reference body does not change the combined inertia enough to scale against."""


class DegenerateAxesError(NumericalError):
    """Principal axes are not well defined (near-equal moments)."""


class IntegrationError(NumericalError):
    """Integrator produced a non-finite state."""

    def __init__(self, message: str, time: float | None = None):
        super().__init__(message)
        self.time = time
