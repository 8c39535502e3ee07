"""Error metrics, measurement probabilities and query-cost estimates."""

import logging
from typing import Dict, Optional, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import eigsh

from .dds import extreme_singular_values
from .errors import RecoveryDomainError
from .models import EvolvedState, MeasurementReport, PGrid, QueryCostModel, SchrodSystem
from .schrod import psi_profile

logger = logging.getLogger(__name__)


def error_metrics(v, reference) -> Dict[str, float]:
    """Relative l2 and max-norm errors of v against reference."""
    v = np.asarray(v)
    reference = np.asarray(reference)
    if v.shape != reference.shape:
        raise ValueError(f"length mismatch: {v.shape} vs {reference.shape}")

    l2_ref = np.linalg.norm(reference)
    linf_ref = np.max(np.abs(reference)) if reference.size else 0.0
    if l2_ref == 0:
        raise ValueError("reference vector has zero norm")

    diff = v - reference
    return {
        'l2_rel': float(np.linalg.norm(diff) / l2_ref),
        'linf_rel': float(np.max(np.abs(diff)) / linf_ref),
    }


def condition_report(A, dense_threshold: int = 1024) -> Dict[str, float]:
    sigma_min, sigma_max = extreme_singular_values(A, dense_threshold=dense_threshold)
    return {
        'sigma_min': sigma_min,
        'sigma_max': sigma_max,
        'kappa': sigma_max / sigma_min if sigma_min > 0 else float('inf'),
    }


def recovery_index_set(grid: PGrid, p_diamond: float = 0.5, exp_cap: float = 2.0) -> np.ndarray:
    """Nodes with p_k >= p_diamond and e^{p_k} <= e^{exp_cap}."""
    nodes = grid.nodes
    indices = np.flatnonzero((nodes >= p_diamond - 1e-12) & (nodes <= exp_cap))
    if indices.size == 0:
        raise RecoveryDomainError(
            f"empty recovery index set for p in [{p_diamond:.4g}, {exp_cap:.4g}]",
            module="diagnostics"
        )
    return indices


def measurement_report(
    state: EvolvedState,
    grid: PGrid,
    psi: str,
    b,
    T: float,
    p_diamond: float = 0.5,
    exp_cap: float = 2.0
) -> MeasurementReport:
    """
    Success probabilities of the measurement chain, from actual state norms.

    Pr0 = ||W(T)||^2 / ||W(0)||^2 is the weight left after the evolution,
    Pr_star the share of ||W(T)||^2 on the recovery nodes and
    P_proj = ||v||^2 / ||V_f||^2 the projection onto v at the recovery node.
    Pv is their product. The same chain restricted to the (v, w) block is
    reported in the *_head fields.
    """
    b = np.asarray(b)
    indices = recovery_index_set(grid, p_diamond, exp_cap)
    profile = psi_profile(psi, grid.nodes)

    Ce = float(np.sqrt(np.sum(profile ** 2)))
    Ce0 = float(np.sqrt(np.sum(profile[indices] ** 2)))

    N = b.size
    W = state.W
    eta0 = state.norm0

    if state.recovered_Vf is not None:
        Vf = state.recovered_Vf
    else:
        k = indices[0]
        Vf = np.exp(grid.nodes[k]) * W[k]
    v = Vf[:N]
    v_norm_sq = float(np.sum(np.abs(v) ** 2))

    Pr0, Pr_star, P_proj = _chain(W, indices, eta0, v_norm_sq, float(np.sum(np.abs(Vf) ** 2)))
    Pr0_head, Pr_star_head, P_proj_head = _chain(
        W[:, :2 * N], indices, eta0, v_norm_sq, float(np.sum(np.abs(Vf[:2 * N]) ** 2))
    )
    Pv = Pr0 * Pr_star * P_proj
    Pv_head = Pr0_head * Pr_star_head * P_proj_head

    b_norm_T = T * float(np.linalg.norm(b))
    v_norm = np.sqrt(v_norm_sq)
    Pv_estimate = (Ce0 ** 2 / Ce ** 2) * v_norm_sq / b_norm_T ** 2
    g_repeats = (Ce / Ce0) * b_norm_T / v_norm if v_norm > 0 else float('inf')

    logger.info(f"Measurement chain: Pv={Pv:.6g}, estimate={Pv_estimate:.6g}, g={g_repeats:.6g}")

    return MeasurementReport(
        Ce=Ce,
        Ce0=Ce0,
        Pr0=Pr0,
        Pr_star=Pr_star,
        P_proj=P_proj,
        Pv=Pv,
        Pv_estimate=Pv_estimate,
        g_repeats=g_repeats,
        Pr0_head=Pr0_head,
        Pr_star_head=Pr_star_head,
        P_proj_head=P_proj_head,
        Pv_head=Pv_head,
        recovery_indices=[int(i) for i in indices]
    )


def _chain(W: np.ndarray, indices: np.ndarray, eta0: float, v_norm_sq: float, Vf_norm_sq: float):
    mass = float(np.sum(np.abs(W) ** 2))
    mass_on_recovery = float(np.sum(np.abs(W[indices]) ** 2))
    Pr0 = mass / eta0 ** 2
    Pr_star = mass_on_recovery / mass if mass > 0 else 0.0
    P_proj = v_norm_sq / Vf_norm_sq if Vf_norm_sq > 0 else 0.0
    return Pr0, Pr_star, P_proj


def hermitian_norm(H, dense_threshold: int = 1024) -> float:
    """Spectral norm of a Hermitian matrix."""
    if H.shape[0] <= dense_threshold:
        dense = H.toarray() if sp.issparse(H) else np.asarray(H)
        return float(np.linalg.norm(dense, 2))
    return float(abs(eigsh(H, k=1, which="LM", return_eigenvectors=False)[0]))


def build_cost_model(
    schrod: SchrodSystem,
    state: EvolvedState,
    report: MeasurementReport,
    epsilon: float,
    kappa: float,
    wavenumber: Optional[float] = None,
    headroom: float = 0.05,
    dense_threshold: int = 1024
) -> QueryCostModel:
    """Query-cost inputs for an evolved and recovered run."""
    alpha_H = (1.0 + headroom) * max(
        hermitian_norm(schrod.H1, dense_threshold),
        hermitian_norm(schrod.H2, dense_threshold)
    )
    v = state.recovered_v
    if v is None:
        raise ValueError("state has no recovered solution")
    delta = epsilon * float(np.linalg.norm(v)) / state.norm0

    return QueryCostModel(
        alpha_H=alpha_H,
        nu_max=schrod.grid.nu_max,
        delta=delta,
        kappa=kappa,
        epsilon=epsilon,
        eta0=state.norm0,
        T=schrod.T,
        g_repeats=report.g_repeats,
        wavenumber=wavenumber
    )


def query_cost(model: QueryCostModel) -> Dict[str, float]:
    """
    Oracle query counts of the cost model.

    be_queries = g (alpha_H nu_max T + log(1/delta)) block-encoding queries
    and g state-preparation queries, with the headline kappa^2 log^2(1/epsilon)
    and (when a wavenumber is given) k^2 log^2(1/epsilon) forms alongside.
    """
    g = model.g_repeats
    log_delta = max(np.log(1.0 / model.delta), 0.0)
    log_eps = np.log(1.0 / model.epsilon)

    be_leading = g * model.alpha_H * model.nu_max * model.T
    be_log = g * log_delta

    result = {
        'be_queries': be_leading + be_log,
        'be_leading': be_leading,
        'be_log': be_log,
        'sp_queries': g,
        'headline_kappa': model.kappa ** 2 * log_eps ** 2,
    }
    if model.wavenumber is not None:
        result['headline_wavenumber'] = model.wavenumber ** 2 * log_eps ** 2
    return result


def fit_decay_rate(times: Sequence[float], errors: Sequence[float]) -> float:
    """Exponential rate r of errors ~ C e^{-r t}, from a least-squares fit of log(errors)."""
    times = np.asarray(times, dtype=float)
    errors = np.asarray(errors, dtype=float)
    keep = errors > 0
    if np.count_nonzero(keep) < 2:
        raise ValueError("need at least two positive errors to fit a rate")
    slope, _ = np.polyfit(times[keep], np.log(errors[keep]), 1)
    return float(-slope)


def fit_order(steps: Sequence[float], errors: Sequence[float]) -> float:
    """Algebraic order q of errors ~ C steps^q (log-log slope)."""
    steps = np.asarray(steps, dtype=float)
    errors = np.asarray(errors, dtype=float)
    keep = (errors > 0) & (steps > 0)
    if np.count_nonzero(keep) < 2:
        raise ValueError("need at least two positive points to fit an order")
    slope, _ = np.polyfit(np.log(steps[keep]), np.log(errors[keep]), 1)
    return float(slope)


def pairwise_orders(steps: Sequence[float], errors: Sequence[float]) -> np.ndarray:
    """Observed order between consecutive points; NaN where undefined."""
    steps = np.asarray(steps, dtype=float)
    errors = np.asarray(errors, dtype=float)
    orders = np.full(steps.size, np.nan)
    for i in range(1, steps.size):
        if errors[i] > 0 and errors[i - 1] > 0 and steps[i] != steps[i - 1]:
            orders[i] = np.log(errors[i] / errors[i - 1]) / np.log(steps[i] / steps[i - 1])
    return orders
