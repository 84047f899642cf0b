"""Exception types shared by the package."""

from __future__ import annotations


class NumericFailure(RuntimeError):
    """An iterative routine did not converge; ``diagnostics`` says how far it got."""

    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class NonsmoothPointError(ValueError):
    """Gradient requested on a stratum where the function is not differentiable."""


class StratumError(ValueError):
    """Phase point sits on a max-tie stratum of ``||q||_inf``."""

    def __init__(self, message: str, indices: tuple[int, ...]):
        super().__init__(message)
        self.indices = tuple(indices)


class DegenerateStartError(ValueError):
    """Start or event state the piecewise simulator refuses to continue from."""


class RunawayError(RuntimeError):
    """No turning event found within the guard time."""


class InconsistencyError(RuntimeError):
    """Two routes to the same quantity disagree beyond tolerance."""


class InvalidSystemError(ValueError):
    """A one-degree-of-freedom system violates its hypotheses."""
