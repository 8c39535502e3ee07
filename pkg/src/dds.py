"""Damped dynamical system whose steady state solves A x = b."""

import logging
from typing import Optional, Sequence, Tuple

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.integrate import solve_ivp
from scipy.optimize import brentq
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh, splu

from .errors import ConfigError, DomainError, SingularSystemError, SingularValueEstimationError, StiffnessError
from .models import DampedSystem

logger = logging.getLogger(__name__)

STOPPING_RULES = ("envelope", "log")


def extreme_singular_values(
    A,
    dense_threshold: int = 1024,
    tol: float = 1e-10,
    maxiter: Optional[int] = None
) -> Tuple[float, float]:
    """
    Return (sigma_min, sigma_max) of a square matrix.

    Small matrices go through a dense SVD. Larger ones use ARPACK on the
    normal operator A^H A: the leading eigenvalue directly and the
    smallest one by shift-invert around zero, with the inverse applied
    through a sparse LU of A.
    """
    N, cols = A.shape
    if N != cols:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")

    if N <= dense_threshold:
        dense = A.toarray() if sp.issparse(A) else np.asarray(A)
        s = scipy.linalg.svdvals(dense)
        return float(s[-1]), float(s[0])

    logger.info(f"Estimating extreme singular values iteratively, N={N}")
    A = sp.csc_matrix(A, dtype=complex)
    AH = A.conj().T.tocsc()
    normal = LinearOperator((N, N), matvec=lambda x: AH @ (A @ x), dtype=complex)

    try:
        lam_max = eigsh(normal, k=1, which="LA", tol=tol, maxiter=maxiter, return_eigenvectors=False)[0]
    except ArpackNoConvergence as e:
        raise SingularValueEstimationError(
            "leading eigenvalue of A^H A did not converge",
            module="dds",
            diagnostics={"N": N, "tol": tol, "converged": len(e.eigenvalues)}
        )
    sigma_max = float(np.sqrt(max(lam_max.real, 0.0)))

    try:
        factor = splu(A)
    except RuntimeError:
        # exactly singular
        return 0.0, sigma_max

    inverse_normal = LinearOperator(
        (N, N),
        matvec=lambda x: factor.solve(factor.solve(x, trans="H")),
        dtype=complex
    )
    try:
        lam_min = eigsh(
            normal, k=1, sigma=0.0, which="LM", OPinv=inverse_normal,
            tol=tol, maxiter=maxiter, return_eigenvectors=False
        )[0]
    except ArpackNoConvergence as e:
        raise SingularValueEstimationError(
            "smallest eigenvalue of A^H A did not converge",
            module="dds",
            diagnostics={"N": N, "tol": tol, "sigma_max": sigma_max, "converged": len(e.eigenvalues)}
        )
    sigma_min = float(np.sqrt(max(lam_min.real, 0.0)))

    return sigma_min, sigma_max


def stopping_time(
    sigma_min: float,
    epsilon: float,
    rule: str = "envelope",
    quantum: float = 2.0 ** -10
) -> float:
    """
    Stopping time for target accuracy epsilon, rounded up to a multiple of quantum.

    'log' gives log(1/epsilon)/sigma_min. 'envelope' accounts for the
    critically damped slowest mode, which decays like (1 + sigma t) e^{-sigma t},
    and returns the smallest T with (1 + sigma T) e^{-sigma T} <= epsilon.
    """
    if not 0 < epsilon < 1:
        raise DomainError(f"epsilon must lie in (0, 1), got {epsilon}")
    if not sigma_min > 0:
        raise DomainError(f"sigma_min must be positive, got {sigma_min}")

    log_eps = np.log(1.0 / epsilon)
    if rule == "log":
        s = log_eps
    elif rule == "envelope":
        # log(1 + s) - s is decreasing on s > 0
        s = brentq(
            lambda s: np.log1p(s) - s + log_eps,
            log_eps,
            log_eps + 2.0 * np.log1p(log_eps) + 1.0,
            xtol=1e-14
        )
    else:
        raise ConfigError(f"unknown stopping rule '{rule}', expected one of {STOPPING_RULES}")

    t = s / sigma_min
    return float(np.ceil(t / quantum - 1e-9) * quantum)


def build_damped(
    A,
    b,
    epsilon: float,
    T: Optional[float] = None,
    gamma: Optional[float] = None,
    stopping_rule: str = "envelope",
    time_quantum: float = 2.0 ** -10,
    dense_threshold: int = 1024,
    singular_rtol: float = 1e-14
) -> DampedSystem:
    """
    Build dV/dt = M V + F with M = [[0, -A^H], [A, -gamma I]], F = [0; -b].

    gamma defaults to the critical value 2 sigma_min(A); T defaults to the
    stopping rule applied to epsilon.
    """
    A = sp.csr_matrix(A, dtype=complex)
    b = np.asarray(b, dtype=complex).ravel()
    N = A.shape[0]
    if A.shape != (N, N) or b.size != N:
        raise ValueError(f"incompatible shapes A={A.shape}, b={b.shape}")

    sigma_min, sigma_max = extreme_singular_values(A, dense_threshold=dense_threshold)
    if sigma_min <= singular_rtol * sigma_max:
        raise SingularSystemError(f"sigma_min(A)={sigma_min:.3e}, system is singular", module="dds")

    if gamma is None:
        gamma = 2.0 * sigma_min
    if T is None:
        T = stopping_time(sigma_min, epsilon, rule=stopping_rule, quantum=time_quantum)
    elif not T > 0:
        raise DomainError(f"stopping time must be positive, got T={T}")

    logger.info(
        f"Damped system: N={N}, sigma_min={sigma_min:.6g}, sigma_max={sigma_max:.6g}, "
        f"gamma={gamma:.6g}, T={T:.6g}"
    )

    M = sp.bmat(
        [[None, -A.conj().T], [A, -gamma * sp.identity(N, dtype=complex)]],
        format="csr"
    )
    F = np.concatenate([np.zeros(N, dtype=complex), -b])

    return DampedSystem(
        M=M,
        F=F,
        gamma=float(gamma),
        sigma_min=sigma_min,
        T=float(T),
        epsilon=epsilon,
        A=A,
        b=b,
        sigma_max=sigma_max
    )


def _integrate_linear(
    matrix: sp.spmatrix,
    forcing: np.ndarray,
    times: np.ndarray,
    method: str,
    rtol: float,
    atol: float
) -> np.ndarray:
    """Solve dy/dt = matrix y + forcing, y(0) = 0, sampled at the given times."""
    times = np.asarray(times, dtype=float)
    dim = forcing.size
    if times.size == 0:
        return np.zeros((0, dim), dtype=complex)
    if np.any(times < 0) or np.any(np.diff(times) < 0):
        raise ValueError("times must be non-negative and sorted")

    if not np.any(forcing):
        return np.zeros((times.size, dim), dtype=complex)

    if method == "expm":
        # augmented generator carries the constant forcing as an extra state
        augmented = np.zeros((dim + 1, dim + 1), dtype=complex)
        augmented[:dim, :dim] = matrix.toarray()
        augmented[:dim, dim] = forcing
        return np.array([scipy.linalg.expm(t * augmented)[:dim, dim] for t in times])

    if method not in ("Radau", "BDF"):
        raise ConfigError(f"unknown integration method '{method}'")

    t_end = float(times[-1])
    if t_end == 0:
        return np.zeros((times.size, dim), dtype=complex)

    # Radau and BDF reject complex state; integrate the real form [Re y; Im y]
    matrix = sp.csr_matrix(matrix)
    real_matrix = sp.bmat(
        [[matrix.real, -matrix.imag], [matrix.imag, matrix.real]],
        format="csr"
    )
    real_forcing = np.concatenate([forcing.real, forcing.imag])
    solution = solve_ivp(
        lambda t, y: real_matrix @ y + real_forcing,
        (0.0, t_end),
        np.zeros(2 * dim),
        method=method,
        t_eval=times,
        rtol=rtol,
        atol=atol,
        jac=real_matrix
    )
    if solution.status != 0:
        raise StiffnessError(f"reference integration failed: {solution.message}", module="dds")

    return solution.y[:dim].T + 1j * solution.y[dim:].T


def reference_trajectory(
    system: DampedSystem,
    times: Sequence[float],
    method: str = "Radau",
    rtol: float = 1e-8,
    atol: float = 1e-12
) -> np.ndarray:
    """V(t) at each of the given times, one row per time."""
    return _integrate_linear(system.M, system.F, np.asarray(times, dtype=float), method, rtol, atol)


def integrate_reference(
    system: DampedSystem,
    t_end: float,
    method: str = "Radau",
    rtol: float = 1e-8,
    atol: float = 1e-12
) -> np.ndarray:
    """V(t_end) from an error-controlled implicit integrator or the exact exponential."""
    return reference_trajectory(system, [t_end], method=method, rtol=rtol, atol=atol)[-1]


def gradient_flow_reference(
    A,
    b,
    t_end: float,
    method: str = "Radau",
    times: Optional[Sequence[float]] = None,
    rtol: float = 1e-8,
    atol: float = 1e-12
) -> np.ndarray:
    """
    Integrate the gradient flow dx/dt = -A^H A x + A^H b from zero.

    Returns x(t_end), or one row per entry of times when given.
    """
    A = sp.csr_matrix(A, dtype=complex)
    b = np.asarray(b, dtype=complex).ravel()
    AH = A.conj().T.tocsr()
    normal = -(AH @ A)

    sample = np.asarray([t_end] if times is None else times, dtype=float)
    trajectory = _integrate_linear(normal, AH @ b, sample, method, rtol, atol)
    return trajectory[-1] if times is None else trajectory


def decay_rate(system: DampedSystem) -> float:
    """Spectral abscissa -max Re(lambda(M)), the asymptotic decay rate of V(t) - V(inf)."""
    eigenvalues = scipy.linalg.eigvals(system.M.toarray())
    return float(-np.max(eigenvalues.real))
