"""Schrodingerization of the damped system: warped phase lift, spectral evolution and recovery."""

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.linalg import eigh_tridiagonal
from scipy.sparse.linalg import eigsh, norm as sparse_norm

from .errors import ConfigError, DomainError, EvolutionError, RecoveryDomainError, ResolutionError
from .models import DampedSystem, EvolvedState, PGrid, Recovery, SchrodSystem

logger = logging.getLogger(__name__)

PSI_ALIASES = {
    "exp": "exp",
    "exp_abs": "exp",
    "cubic": "cubic",
    "cubic_smooth": "cubic",
}


def homogenize(system: DampedSystem) -> Tuple[sp.csr_matrix, np.ndarray]:
    """
    Absorb the constant source into the state.

    M_f = [[M, I/T], [0, 0]] and V_f(0) = [0; T F], so the auxiliary
    block r stays equal to T F for all time.
    """
    if not system.T > 0:
        raise DomainError(f"stopping time must be positive, got T={system.T}")

    dim = system.dim
    zero = sp.csr_matrix((dim, dim), dtype=complex)
    M_f = sp.bmat(
        [[system.M, sp.identity(dim, dtype=complex, format="csr") / system.T], [zero, zero]],
        format="csr"
    )
    Vf0 = np.concatenate([np.zeros(dim, dtype=complex), system.T * system.F])
    return M_f, Vf0


def hermitian_split(M_f) -> Tuple[sp.csr_matrix, sp.csr_matrix]:
    """Return H1 = (M_f + M_f^H)/2 and H2 = (M_f - M_f^H)/(2i), so M_f = H1 + i H2."""
    M_f = sp.csr_matrix(M_f, dtype=complex)
    adjoint = M_f.conj().T
    H1 = ((M_f + adjoint) * 0.5).tocsr()
    H2 = ((M_f - adjoint) * (-0.5j)).tocsr()
    return H1, H2


def hermitian_extremes(H, dense_threshold: int = 2048) -> Tuple[float, float]:
    """(lambda_min, lambda_max) of a Hermitian matrix."""
    if H.shape[0] <= dense_threshold:
        dense = H.toarray() if sp.issparse(H) else np.asarray(H)
        eigenvalues = scipy.linalg.eigvalsh(dense)
        return float(eigenvalues[0]), float(eigenvalues[-1])

    lam_max = eigsh(H, k=1, which="LA", return_eigenvectors=False)[0]
    lam_min = eigsh(H, k=1, which="SA", return_eigenvectors=False)[0]
    return float(lam_min), float(lam_max)


def psi_profile(psi: str, p) -> np.ndarray:
    """
    Initial profile in the warped coordinate.

    'exp' is e^{-|p|}. 'cubic' replaces it on (-1, 0) by the cubic that
    matches e^{-|p|} to first order at both ends, smoothing the kink at 0.
    """
    kind = PSI_ALIASES.get(psi)
    if kind is None:
        raise ConfigError(f"unknown psi profile '{psi}'")

    p = np.asarray(p, dtype=float)
    tail = np.exp(-np.abs(p))
    if kind == "exp":
        return tail

    e = np.exp(-1.0)
    cubic = ((-3.0 + 3.0 * e) * p + (-5.0 + 4.0 * e)) * p * p - p + 1.0
    return np.where((p > -1.0) & (p < 0.0), cubic, tail)


def choose_p_domain(
    H1,
    T: float,
    epsilon: float,
    psi: str = "cubic",
    m: int = 8,
    LR: Union[str, Tuple[float, float], None] = None,
    margin: float = 1.0,
    strict: bool = False,
    max_dp: float = 1.0,
    extremes: Optional[Tuple[float, float]] = None
) -> PGrid:
    """
    Truncate the p-axis to [-L, R) and lay a periodic grid of 2^m nodes on it.

    The automatic choice satisfies e^{-L + lambda_minus T} <= epsilon and
    e^{-R + lambda_plus T} <= epsilon with an extra margin on both sides.
    """
    if not 0 < epsilon < 1:
        raise DomainError(f"epsilon must lie in (0, 1), got {epsilon}")
    if psi not in PSI_ALIASES:
        raise ConfigError(f"unknown psi profile '{psi}'")

    lam_min, lam_max = extremes if extremes is not None else hermitian_extremes(H1)
    log_eps = np.log(1.0 / epsilon)
    L_required = max(-lam_min, 0.0) * T + log_eps
    R_required = max(lam_max, 0.0) * T + log_eps

    if LR is None or LR == "auto":
        L = L_required + margin
        R = R_required + margin
    else:
        L, R = (float(value) for value in LR)
        if L < L_required or R < R_required:
            logger.warning(
                f"p-domain [-{L:.4g}, {R:.4g}] is narrower than the truncation "
                f"criterion [-{L_required:.4g}, {R_required:.4g}]"
            )

    n_p = 2 ** m
    width = L + R
    dp = width / n_p

    if dp > max_dp:
        message = f"p-grid too coarse for psi='{psi}': dp={dp:.4g} > {max_dp:g} (m={m})"
        if strict:
            raise ResolutionError(message, module="schrod")
        logger.warning(message)

    nodes = -L + dp * np.arange(n_p)
    nu = 2.0 * np.pi * (np.arange(n_p) - n_p / 2) / width

    logger.info(f"p-domain: L={L:.6g}, R={R:.6g}, N_p={n_p}, dp={dp:.6g}")

    return PGrid(L=L, R=R, n_p=n_p, dp=dp, nodes=nodes, nu=nu)


def build_schrod_system(
    system: DampedSystem,
    epsilon: float,
    psi: str = "cubic",
    m: int = 8,
    LR: Union[str, Tuple[float, float], None] = None,
    margin: float = 1.0,
    strict: bool = False
) -> SchrodSystem:
    """Homogenize, split and lift a damped system onto a p-grid."""
    M_f, Vf0 = homogenize(system)
    H1, H2 = hermitian_split(M_f)
    lam_min, lam_max = hermitian_extremes(H1)

    p_diamond = max(lam_max * system.T, 0.0)
    if abs(p_diamond - 0.5) > 1e-9:
        logger.warning(f"recovery threshold p_diamond={p_diamond:.12g} differs from 1/2")

    grid = choose_p_domain(
        H1, system.T, epsilon, psi=psi, m=m, LR=LR, margin=margin,
        strict=strict, extremes=(lam_min, lam_max)
    )

    return SchrodSystem(
        H1=H1,
        H2=H2,
        M_f=M_f,
        Vf0=Vf0,
        T=system.T,
        grid=grid,
        psi=PSI_ALIASES[psi],
        p_diamond=p_diamond,
        lambda_max=lam_max,
        lambda_min=lam_min
    )


def init_profile(psi: str, grid: PGrid, Vf0: np.ndarray) -> np.ndarray:
    """W(0, p_k) = psi(p_k) V_f(0), one row per p-node."""
    return np.outer(psi_profile(psi, grid.nodes), np.asarray(Vf0, dtype=complex))


def _alternating_signs(n_p: int) -> np.ndarray:
    return np.where(np.arange(n_p) % 2 == 0, 1.0, -1.0)[:, None]


def to_fourier(W: np.ndarray) -> np.ndarray:
    """Coefficients on the modes e^{i nu_l (p + L)}, row l matching nu_l."""
    return np.fft.fft(_alternating_signs(W.shape[0]) * W, axis=0, norm="ortho")


def from_fourier(W_hat: np.ndarray) -> np.ndarray:
    return _alternating_signs(W_hat.shape[0]) * np.fft.ifft(W_hat, axis=0, norm="ortho")


def _lanczos(H, v: np.ndarray, m: int):
    """Lanczos with full reorthogonalization; returns basis rows, alpha, beta."""
    n = v.size
    basis = np.zeros((m, n), dtype=complex)
    basis[0] = v / np.linalg.norm(v)
    alpha = []
    beta = []

    for j in range(m):
        w = H @ basis[j]
        a = float(np.vdot(basis[j], w).real)
        w = w - a * basis[j]
        if j > 0:
            w = w - beta[j - 1] * basis[j - 1]
        w = w - basis[:j + 1].T @ (basis[:j + 1].conj() @ w)

        alpha.append(a)
        b = float(np.linalg.norm(w))
        beta.append(b)

        if j == m - 1 or b <= 1e-14 * max(1.0, abs(a)):
            break
        basis[j + 1] = w / b

    size = len(alpha)
    return basis[:size], np.array(alpha), np.array(beta)


def krylov_propagate(
    H,
    vec: np.ndarray,
    t: float,
    krylov_dim: int = 30,
    tol: float = 1e-10,
    mode: Optional[int] = None
) -> np.ndarray:
    """
    Apply exp(-i t H) to vec for Hermitian H by sub-stepped Lanczos.

    A sub-step is accepted when the a-posteriori estimate
    beta_m |[exp(-i dt T_m)]_{m,1}| ||v|| stays below tol ||vec||. Each
    Lanczos basis is halved down to an acceptable step, then doubled for as
    long as the estimate allows, and the next sub-step starts from there.
    """
    result = np.array(vec, dtype=complex)
    beta0 = float(np.linalg.norm(result))
    if beta0 == 0 or t == 0:
        return result

    m = min(krylov_dim, result.size)
    h_norm = sparse_norm(H, 1) if sp.issparse(H) else np.linalg.norm(H, 1)
    step = t if h_norm == 0 else min(t, 5.0 / h_norm)
    min_step = abs(t) * 1e-12
    elapsed = 0.0

    while elapsed < t:
        basis, alpha, beta = _lanczos(H, result, m)
        if alpha.size > 1:
            evals, evecs = eigh_tridiagonal(alpha, beta[:-1])
        else:
            evals, evecs = alpha, np.ones((1, 1))
        current_norm = float(np.linalg.norm(result))

        def coefficients(dt: float) -> np.ndarray:
            return evecs @ (np.exp(-1j * dt * evals) * evecs[0])

        def acceptable(dt: float) -> bool:
            return beta[-1] * abs(coefficients(dt)[-1]) * current_norm <= tol * beta0

        remaining = t - elapsed
        step = min(step, remaining)
        while not acceptable(step):
            step *= 0.5
            if step < min_step:
                raise EvolutionError(
                    f"Krylov step underflow at t={elapsed:.6g}",
                    module="schrod",
                    mode=mode
                )
        while step < remaining:
            trial = min(2.0 * step, remaining)
            if not acceptable(trial):
                break
            step = trial

        result = current_norm * (coefficients(step) @ basis)
        elapsed = t if step >= remaining else elapsed + step

    return result


def evolve(
    schrod: SchrodSystem,
    W0: np.ndarray,
    t: Optional[float] = None,
    threads: int = 1,
    dense_threshold: int = 512,
    krylov_dim: int = 30,
    tol: float = 1e-10
) -> EvolvedState:
    """
    Evolve W under i dW/dt = (D_p H1 - H2) W, one Fourier mode at a time.

    Mode l evolves by exp(-i t (nu_l H1 - H2)); modes are independent and
    each writes only its own row of the output.
    """
    t = schrod.T if t is None else float(t)
    W0 = np.asarray(W0, dtype=complex)
    norm0 = float(np.linalg.norm(W0))

    if t == 0:
        return EvolvedState(W=W0.copy(), norm0=norm0, normT=norm0, time=0.0)

    grid = schrod.grid
    W_hat = to_fourier(W0)
    out = np.empty_like(W_hat)
    dense = schrod.dim <= dense_threshold

    if dense:
        H1 = schrod.H1.toarray()
        H2 = schrod.H2.toarray()
    else:
        H1 = schrod.H1
        H2 = schrod.H2

    logger.info(
        f"Evolving {grid.n_p} modes of dimension {schrod.dim} to t={t:.6g} "
        f"({'dense expm' if dense else 'Krylov'}, threads={threads})"
    )

    def propagate(l: int):
        generator = grid.nu[l] * H1 - H2
        if dense:
            out[l] = scipy.linalg.expm(-1j * t * generator) @ W_hat[l]
        else:
            out[l] = krylov_propagate(generator.tocsr(), W_hat[l], t, krylov_dim=krylov_dim, tol=tol, mode=l)
        if not np.all(np.isfinite(out[l])):
            raise EvolutionError("non-finite propagated mode", module="schrod", mode=l)

    if threads == 1:
        for l in range(grid.n_p):
            propagate(l)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(propagate, range(grid.n_p)))

    W = from_fourier(out)
    normT = float(np.linalg.norm(W))

    state = EvolvedState(W=W, norm0=norm0, normT=normT, time=t)
    if abs(state.norm_ratio - 1.0) > 1e-9:
        logger.warning(f"norm drift during evolution: ||W(t)||/||W(0)|| = {state.norm_ratio:.15g}")
    return state


def evolve_series(
    schrod: SchrodSystem,
    W0: np.ndarray,
    times: Sequence[float],
    node_index: int,
    dense_threshold: int = 2048
) -> np.ndarray:
    """
    e^{p_k} W(t, p_k) at a single node for many times t.

    Each mode generator is diagonalized once and reused for every time.
    Returns one row of length 4N per time.
    """
    if schrod.dim > dense_threshold:
        raise ConfigError(f"time series needs dim <= {dense_threshold}, got {schrod.dim}")

    grid = schrod.grid
    n_p = grid.n_p
    times = np.asarray(times, dtype=float)
    W_hat = to_fourier(np.asarray(W0, dtype=complex))

    # row node_index of the inverse transform
    sign = 1.0 if node_index % 2 == 0 else -1.0
    synthesis = sign * np.exp(2j * np.pi * node_index * np.arange(n_p) / n_p) / np.sqrt(n_p)

    H1 = schrod.H1.toarray()
    H2 = schrod.H2.toarray()
    series = np.zeros((times.size, schrod.dim), dtype=complex)

    for l in range(n_p):
        evals, evecs = scipy.linalg.eigh(grid.nu[l] * H1 - H2)
        coefficients = evecs.conj().T @ W_hat[l]
        modal = (np.exp(-1j * np.outer(times, evals)) * coefficients) @ evecs.T
        series += synthesis[l] * modal

    return np.exp(grid.nodes[node_index]) * series


def recovery_node(grid: PGrid, p_diamond: float, p_min: Optional[float] = None) -> int:
    """Index of the smallest node at or above the recovery threshold."""
    threshold = p_diamond if p_min is None else max(p_min, p_diamond)
    admissible = np.flatnonzero(grid.nodes >= threshold - 1e-12)
    if admissible.size == 0:
        raise RecoveryDomainError(
            f"no p-node >= {threshold:.6g} on [-{grid.L:.4g}, {grid.R:.4g})",
            module="schrod"
        )
    return int(admissible[0])


def recover(
    state: EvolvedState,
    schrod: SchrodSystem,
    strategy: str = "point",
    p_min: Optional[float] = None
) -> Recovery:
    """
    Undo the warped phase: V_f(t) = e^{p} W(t, p) for p >= p_diamond.

    'point' reads a single node. 'integral' uses
    e^{p_k} sum_{j >= k} W(t, p_j) dp, the trapezoidal form of
    e^{p} int_p^inf W(t, q) dq.
    """
    grid = schrod.grid
    k = recovery_node(grid, schrod.p_diamond, p_min)
    p_node = float(grid.nodes[k])

    if strategy == "point":
        Vf = np.exp(p_node) * state.W[k]
    elif strategy == "integral":
        tail = state.W[k:]
        Vf = np.exp(p_node) * grid.dp * (tail.sum(axis=0) - 0.5 * tail[0])
    else:
        raise ConfigError(f"unknown recovery strategy '{strategy}'")

    N = schrod.N
    v = Vf[:N]
    state.recovered_Vf = Vf
    state.recovered_v = v

    logger.info(f"Recovered v at p={p_node:.6g} (node {k}, {strategy})")

    return Recovery(
        Vf=Vf,
        v=v,
        w=Vf[N:2 * N],
        r=Vf[2 * N:],
        node_index=k,
        p_node=p_node,
        strategy=strategy
    )
