"""Dispersion-corrected finite-difference Helmholtz systems on the unit interval."""

import logging
from typing import Callable, Union

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .dds import extreme_singular_values
from .errors import ConfigError, DomainError, PreconditionerSingularError, SingularSystemError
from .models import DiscreteHelmholtz, HelmholtzProblem, PreconditionedSystem

logger = logging.getLogger(__name__)

PRECONDITIONER_SHIFTS = {
    "real_shift": 1.0,
    "imaginary_shift": 1j,
}


def shifted_wavenumber(k: float, h: float) -> float:
    """
    Return the shifted wavenumber k_hat = sqrt((2/h^2)(1 - cos(kh))).

    With k_hat in the 3-point stencil the discrete plane wave e^{ikx_j}
    is annihilated exactly, so the scheme carries no dispersion error.
    """
    kh = k * h
    if not 0 < kh < np.pi:
        raise DomainError(f"shifted wavenumber needs 0 < kh < pi, got kh={kh:.6g}")

    # 1 - cos(kh) = 2 sin^2(kh/2), evaluated without cancellation
    return 2.0 * np.sin(0.5 * kh) / h


def source_function(source: Union[str, Callable], k: float) -> Callable:
    """Resolve a source tag ('neg_sin', 'zero') or pass a callable through."""
    if callable(source):
        return source
    if source == "neg_sin":
        return lambda x: -np.sin(k * x)
    if source == "zero":
        return lambda x: np.zeros_like(x, dtype=float)
    raise ConfigError(f"unknown source tag '{source}'")


def build_system(
    prob: HelmholtzProblem,
    singular_rtol: float = 1e-14,
    dense_threshold: int = 1024
) -> DiscreteHelmholtz:
    """
    Assemble the h^2-scaled system A x = b.

    Unknowns are u_1..u_N; u_0 is eliminated by the Dirichlet condition.
    With a Robin condition at x = 1 the endpoint is an unknown and its row
    comes from the ghost-point method, halved so that A stays complex
    symmetric. Without one, u(1) = 0 is eliminated as well.
    """
    h = prob.h
    nodes = 2 ** prob.n
    k_hat = shifted_wavenumber(prob.k, h) if prob.dispersion_correction else prob.k

    if prob.is_robin:
        grid = h * np.arange(1, nodes + 1)
    else:
        grid = h * np.arange(1, nodes)
    N = grid.size

    logger.info(f"Assembling Helmholtz system: k={prob.k}, h=2^-{prob.n}, N={N}, k_hat={k_hat:.10g}")

    diagonal = np.full(N, 2.0 - (k_hat * h) ** 2, dtype=complex)
    off_diagonal = -np.ones(N - 1, dtype=complex)

    f = source_function(prob.source, prob.k)
    b = (h ** 2 * np.asarray(f(grid))).astype(complex)
    b[0] += prob.bc_left

    if prob.is_robin:
        impedance = prob.bc_right.resolve(k_hat if prob.robin_uses_shifted else prob.k)
        # ghost point: u_{N+1} = u_{N-1} + 2 h impedance u_N
        diagonal[-1] = 0.5 * (2.0 - (k_hat * h) ** 2) - h * impedance
        b[-1] *= 0.5

    A = sp.diags(
        [off_diagonal, diagonal, off_diagonal],
        offsets=[-1, 0, 1],
        shape=(N, N),
        format="csr",
        dtype=complex
    )

    sigma_min, sigma_max = extreme_singular_values(A, dense_threshold=dense_threshold)
    if sigma_min < singular_rtol * sigma_max:
        raise SingularSystemError(
            f"sigma_min(A)={sigma_min:.3e} below {singular_rtol:g}*||A||; "
            f"k^2 sits on a discrete eigenvalue",
            module="helmholtz"
        )

    return DiscreteHelmholtz(
        A=A,
        b=b,
        h=h,
        k=prob.k,
        k_hat=k_hat,
        grid=grid,
        boundary="robin" if prob.is_robin else "dirichlet",
        problem=prob
    )


def exact_solution(k: float, x):
    """
    Closed-form solution of -u'' - k^2 u = -sin(kx), u(0) = 0, u'(1) - iku(1) = 0.

    u(x) = -x cos(kx)/(2k) + sin(kx) (1 + e^{2ik} - 2ik)/(4k^2)
    """
    x = np.asarray(x, dtype=float)
    coefficient = (1.0 + np.exp(2j * k) - 2j * k) / (4.0 * k ** 2)
    u = -x * np.cos(k * x) / (2.0 * k) + np.sin(k * x) * coefficient

    if u.ndim == 0:
        return complex(u)
    return u


def _boundary_weights(system: DiscreteHelmholtz) -> np.ndarray:
    """Row scaling of the mass term (the Robin row is halved)."""
    weights = np.ones(system.N)
    if system.boundary == "robin":
        weights[-1] = 0.5
    return weights


def negative_laplacian(system: DiscreteHelmholtz) -> sp.csr_matrix:
    """h^2 (-Delta_h) with the boundary rows of A (A without its wavenumber term)."""
    weights = _boundary_weights(system)
    return (system.A + sp.diags((system.k_hat * system.h) ** 2 * weights)).tocsr()


def build_preconditioned(system: DiscreteHelmholtz, mode: str) -> PreconditionedSystem:
    """
    Apply P = (-Delta_h + s k^2 I)^{-1}, s = 1 (real_shift) or i (imaginary_shift).

    P^{-1} is factorized once with a sparse LU; PA and Pb are produced by
    solves against that factorization, never by forming P itself.
    """
    if mode == "none":
        sigma_min, sigma_max = extreme_singular_values(system.A)
        return PreconditionedSystem(
            mode=mode,
            PA=system.A.toarray(),
            Pb=system.b.copy(),
            kappa_estimate=sigma_max / sigma_min
        )

    if mode not in PRECONDITIONER_SHIFTS:
        raise ConfigError(f"unknown preconditioner mode '{mode}'")

    shift = PRECONDITIONER_SHIFTS[mode]
    weights = _boundary_weights(system)
    shifted = (
        negative_laplacian(system) + sp.diags(shift * (system.k * system.h) ** 2 * weights)
    ).tocsc()

    logger.info(f"Factorizing shifted Laplacian ({mode}), N={system.N}")

    try:
        factor = splu(shifted)
    except RuntimeError as e:
        raise PreconditionerSingularError(f"shifted Laplacian factorization failed: {e}", module="helmholtz")

    PA = factor.solve(system.A.toarray())
    Pb = factor.solve(system.b)

    if not (np.all(np.isfinite(PA)) and np.all(np.isfinite(Pb))):
        raise PreconditionerSingularError("non-finite entries after preconditioner solve", module="helmholtz")

    sigma_min, sigma_max = extreme_singular_values(PA)
    kappa = sigma_max / sigma_min
    logger.info(f"kappa(PA) = {kappa:.6g}")

    return PreconditionedSystem(
        mode=mode,
        PA=PA,
        Pb=Pb,
        kappa_estimate=kappa,
        shifted_laplacian=shifted,
        solve=factor.solve
    )


def dirichlet_laplacian_eigenvalues(n: int) -> np.ndarray:
    """Eigenvalues mu_j^2 = (4/h^2) sin^2(j pi h / 2) of -Delta_h with u(0) = u(1) = 0."""
    h = 2.0 ** (-n)
    j = np.arange(1, 2 ** n)
    return (4.0 / h ** 2) * np.sin(0.5 * j * np.pi * h) ** 2


def predicted_preconditioned_spectrum(k: float, n: int, mode: str = "real_shift") -> np.ndarray:
    """lambda_j(PA) = (mu_j^2 - k^2) / (mu_j^2 + s k^2) for the Dirichlet validation case."""
    if mode not in PRECONDITIONER_SHIFTS:
        raise ConfigError(f"unknown preconditioner mode '{mode}'")
    mu2 = dirichlet_laplacian_eigenvalues(n)
    return (mu2 - k ** 2) / (mu2 + PRECONDITIONER_SHIFTS[mode] * k ** 2)
