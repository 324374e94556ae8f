"""Exceptions shared by the solvers."""

from __future__ import annotations


class SolverError(RuntimeError):
    """Linear or nonlinear solve failed; ``diagnostics`` holds details."""

    def __init__(self, message: str, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


class InvalidDeformationError(SolverError):
    """Stretch (and with it J) became non-positive at an integration point."""

    def __init__(self, location: float, stretch: float, increment: int | None = None, iteration: int | None = None):
        super().__init__(
            f"invalid deformation: stretch {stretch:.3e} <= 0 at X = {location:.6g}"
            + (f" (increment {increment}, iteration {iteration})" if increment is not None else ""),
            location=location,
            stretch=stretch,
            increment=increment,
            iteration=iteration,
        )
        self.location = location
        self.stretch = stretch
        self.increment = increment
        self.iteration = iteration


class ConfigError(ValueError):
    """Invalid run configuration; ``key`` names the offending entry."""

    def __init__(self, message: str, key: str | None = None):
        super().__init__(message)
        self.key = key
