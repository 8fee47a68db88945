"""
Exception hierarchy for lordnet-lab.
"""

from typing import Any, Dict, Optional, Sequence


class LordnetError(Exception):
    """Base class for every error raised by lordnet-lab."""


class ShapeError(LordnetError, ValueError):
    """Shapes, axes or channel counts do not line up."""

    def __init__(self, message: str, *shapes: Sequence[int]):
        if shapes:
            listed = ", ".join(str(tuple(shape)) for shape in shapes)
            message = f"{message} (shapes: {listed})"
        super().__init__(message)


class SizeError(LordnetError, ValueError):
    """A tensor or grid is empty, too small or too large for the requested operation."""


class ContractError(LordnetError, ValueError):
    """A call violates an API contract (non-scalar loss, empty tape, ...)."""


class ConfigError(LordnetError, ValueError):
    """Invalid configuration. `path` is the dotted location of the offending key."""

    def __init__(self, message: str, path: Optional[str] = None):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class NumericalError(LordnetError, ArithmeticError):
    """A numerical procedure failed."""


class NotConvergedError(NumericalError):
    def __init__(self, residual: float, iterations: int, tol: float):
        self.residual = residual
        self.iterations = iterations
        self.tol = tol
        super().__init__(
            f"conjugate gradient did not converge: relative residual {residual:.3e} "
            f"after {iterations} iterations (tol {tol:.1e})"
        )


class DivergenceError(NumericalError):
    def __init__(self, iteration: int, loss: float, last_good_params: Optional[Dict[str, Any]] = None):
        self.iteration = iteration
        self.loss = loss
        self.last_good_params = last_good_params
        super().__init__(f"training diverged at iteration {iteration} (loss {loss})")


class NonFiniteStateError(NumericalError):
    def __init__(self, step: int):
        self.step = step
        super().__init__(f"rollout produced a non-finite state at step {step}")


class DegenerateTruthError(NumericalError):
    """Relative error requested against a ground truth with zero norm."""


class AcceptanceError(LordnetError):
    def __init__(self, message: str, failures: Optional[Sequence[str]] = None):
        self.failures = list(failures or [])
        super().__init__(message)
