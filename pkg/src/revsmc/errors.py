#!/usr/bin/env python3
"""Exceptions shared by the engine, the models and the baseline."""


class DegeneracyError(RuntimeError):
    """Every particle weight is zero, nothing can be estimated."""


class EmptySupportError(RuntimeError):
    """A reverse proposal has no admissible predecessor."""


class InvariantError(AssertionError):
    """A trajectory violates the first-hitting / last-exit convention."""


class QuadratureError(ArithmeticError):
    """Numerical integration did not converge."""


class SingularSystemError(ArithmeticError):
    """A linear system has no (numerically) unique solution."""


class RejectionError(RuntimeError):
    """A rejection sampler did not accept within its attempt budget."""


class StagnationError(RuntimeError):
    """Adaptive splitting made no progress within its iteration budget."""


class SimulationError(RuntimeError):
    """A forward simulation did not produce the requested event."""


class ConvergenceError(ArithmeticError):
    """An iterative root finder did not reach its tolerance."""
