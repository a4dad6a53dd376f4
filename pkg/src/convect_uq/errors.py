"""Typed errors shared across the toolkit.

The CLI maps these onto exit codes: ConfigError -> 1, NonConvergenceError
-> 2, MissingPrerequisiteError -> 3. Everything else is a plain bug and
surfaces as a traceback.
"""


class ToolkitError(Exception):
    """Base class for all errors raised deliberately by this package."""


class ConfigError(ToolkitError, ValueError):
    """Malformed or invalid run configuration."""


class GridError(ToolkitError, ValueError):
    """Invalid grid size, axis, coordinate, or field shape."""


class FieldFormatError(ToolkitError, ValueError):
    """Malformed delimited field file (header, row count, or values)."""


class SamplingError(ToolkitError, ValueError):
    """Invalid sampling request (counts, dimensions, probabilities)."""


class NonConvergenceError(ToolkitError, RuntimeError):
    """A solve hit its iteration or step cap, or a field blew up."""


class LinearSolverError(NonConvergenceError):
    """Preconditioned CG failed; carries the final relative residual."""

    def __init__(self, what: str, residual: float, iterations: int):
        self.residual = float(residual)
        self.iterations = int(iterations)
        super().__init__(
            f"{what}: no convergence after {iterations} iterations "
            f"(relative residual {residual:.3e})"
        )


class BlowupError(NonConvergenceError):
    """A transported field exceeded the blow-up threshold."""


class DimensionError(ToolkitError, ValueError):
    """Dimensionality of an input does not match what the operation needs."""


class FitError(ToolkitError, ValueError):
    """Surrogate fitting failed (underdetermined or ill conditioned)."""


class SensitivityUndefinedError(ToolkitError, ValueError):
    """Sobol indices requested for a model with zero variance."""


class MetricUndefinedError(ToolkitError, ValueError):
    """Relative error metric requested against an all-zero reference."""


class NetworkError(ToolkitError, ValueError):
    """Inconsistent network architecture or dataset shapes."""


class EnsembleError(ToolkitError, RuntimeError):
    """Too many ensemble members failed to finish."""


class MissingPrerequisiteError(ToolkitError, FileNotFoundError):
    """A pipeline stage needs an artifact that has not been produced."""
