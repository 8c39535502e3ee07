"""Exceptions raised by the Schrodingerization emulator."""

from typing import Optional


class ConfigError(ValueError):
    """Invalid experiment configuration or unknown option tag."""


class DomainError(ValueError):
    """A parameter lies outside the domain where a formula is valid."""


class NumericalError(RuntimeError):
    """Base class for numerical failures, tagged with the module that raised them."""

    def __init__(self, message: str, module: str = ""):
        self.module = module
        self.message = message
        super().__init__(f"[{module}] {message}" if module else message)


class SingularSystemError(NumericalError):
    """The Helmholtz matrix is numerically singular (k^2 hits a discrete eigenvalue)."""


class PreconditionerSingularError(NumericalError):
    """The shifted Laplacian could not be factorized."""


class SingularValueEstimationError(NumericalError):
    """Iterative extreme singular value estimation did not converge."""

    def __init__(self, message: str, module: str = "", diagnostics: Optional[dict] = None):
        self.diagnostics = diagnostics or {}
        super().__init__(message, module)


class StiffnessError(NumericalError):
    """The reference integrator's step size underflowed."""


class EvolutionError(NumericalError):
    """A per-mode propagator failed to reach the requested accuracy."""

    def __init__(self, message: str, module: str = "", mode: Optional[int] = None):
        self.mode = mode
        super().__init__(message, module)


class RecoveryDomainError(NumericalError):
    """No p-grid node is admissible for solution recovery."""


class ResolutionError(NumericalError):
    """The p-grid is too coarse to resolve the initial profile (strict mode)."""
