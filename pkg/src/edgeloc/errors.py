"""Exception hierarchy. ``exit_code`` is what the CLI returns for each family."""
from __future__ import annotations


class SceneError(ValueError):
    """Invalid scene, source or configuration."""

    exit_code = 1

    def __init__(self, message: str, violations: list[str] | None = None):
        self.violations = list(violations or [])
        if self.violations:
            message = message + ":\n  " + "\n  ".join(self.violations)
        super().__init__(message)


class LocalizationError(RuntimeError):
    """A measurement rejected by the pipeline (mirrors the screening rules)."""

    exit_code = 2


class LowSignalError(LocalizationError):
    pass


class NoDetectionError(LocalizationError):
    pass


class InsufficientChannelsError(LocalizationError):
    pass


class DegenerateFitError(LocalizationError):
    pass


class FitRejectedError(LocalizationError):
    def __init__(self, rmse: float, threshold: float):
        self.rmse = rmse
        self.threshold = threshold
        super().__init__(f"wavefront fit rejected: rmse {rmse * 1e3:.4f} ms "
                         f"exceeds {threshold * 1e3:.4f} ms")


class InconsistentFitError(LocalizationError):
    pass


class AmbiguousAzimuthError(LocalizationError):
    pass
