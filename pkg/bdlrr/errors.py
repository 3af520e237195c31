"""
Exception hierarchy for bdlrr.

Solvers never raise on plain non-convergence; they return results
flagged ``converged=False``. The errors below cover everything that
makes a result meaningless.
"""

from __future__ import annotations

from pathlib import Path


class BdlrrError(Exception):
    """Base class for all bdlrr errors."""


class DimensionError(BdlrrError, ValueError):
    """Matrix shapes do not agree."""


class NumericalError(BdlrrError):
    """A decomposition or factorization failed, or a value became non-finite."""


class DivergenceError(NumericalError):
    """An iterate of a solver became non-finite."""

    def __init__(self, variable: str, iteration: int):
        self.variable = variable
        self.iteration = iteration
        super().__init__(
            f"non-finite values in {variable} at iteration {iteration}"
        )

    def __reduce__(self):
        return (self.__class__, (self.variable, self.iteration))


class SingularSystemError(NumericalError):
    """The ridge normal equations are singular."""


class UndefinedRatioError(BdlrrError, ValueError):
    """A ratio was requested for an all-zero matrix."""


class ParseError(BdlrrError):
    """A matrix or label file is malformed."""

    def __init__(self, path: str | Path, line: int, message: str):
        self.path = str(path)
        self.line = line
        self.message = message
        super().__init__(f"{path}:{line}: {message}")

    def __reduce__(self):
        return (self.__class__, (self.path, self.line, self.message))


class TrialError(BdlrrError):
    """An experiment trial failed."""

    def __init__(self, trial: int, cause: Exception):
        self.trial = trial
        self.cause = cause
        super().__init__(f"trial {trial} failed: {cause}")

    def __reduce__(self):
        return (self.__class__, (self.trial, self.cause))
