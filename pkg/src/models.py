"""Data models for the Schrodingerization emulator."""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple, Union

import numpy as np
import scipy.sparse as sp

from .errors import ConfigError, DomainError

SOURCE_TAGS = ("neg_sin", "zero")
PSI_TAGS = ("exp", "cubic")
PRECONDITION_TAGS = ("none", "real", "imag")
RECOVERY_TAGS = ("point", "integral")


@dataclass(frozen=True)
class RobinCondition:
    """Radiation condition u'(1) - impedance * u(1) = 0.

    impedance defaults to i*k, the first-order Sommerfeld condition.
    """

    impedance: Optional[complex] = None

    def resolve(self, k: float) -> complex:
        return 1j * k if self.impedance is None else complex(self.impedance)


@dataclass
class HelmholtzProblem:
    """-u'' - k^2 u = f on (0, 1), u(0) = bc_left, Robin (or u(1) = 0) at x = 1."""

    k: float
    n: int
    bc_left: complex = 0j
    bc_right: Optional[RobinCondition] = RobinCondition()
    source: Union[str, Callable] = "neg_sin"
    dispersion_correction: bool = True
    robin_uses_shifted: bool = False

    def __post_init__(self):
        if self.k <= 0:
            raise DomainError(f"wavenumber must be positive, got k={self.k}")
        if self.n < 1:
            raise DomainError(f"mesh exponent must be >= 1, got n={self.n}")
        if self.kh >= 1.0:
            raise DomainError(f"mesh too coarse: kh={self.kh:.6g} must be < 1")
        if isinstance(self.source, str) and self.source not in SOURCE_TAGS:
            raise DomainError(f"unknown source tag '{self.source}'")

    @property
    def h(self) -> float:
        return 2.0 ** (-self.n)

    @property
    def kh(self) -> float:
        return self.k * self.h

    @property
    def is_robin(self) -> bool:
        return self.bc_right is not None


@dataclass
class DiscreteHelmholtz:
    """Assembled (h^2-scaled) finite-difference system A x = b."""

    A: sp.csr_matrix
    b: np.ndarray
    h: float
    k: float
    k_hat: float
    grid: np.ndarray
    boundary: str = "robin"
    problem: Optional[HelmholtzProblem] = None

    @property
    def N(self) -> int:
        return self.A.shape[0]


@dataclass
class PreconditionedSystem:
    """PA and Pb for P^{-1} = -Delta_h + s k^2 I, s in {1, i}."""

    mode: str
    PA: np.ndarray
    Pb: np.ndarray
    kappa_estimate: float
    shifted_laplacian: Optional[sp.csc_matrix] = None
    solve: Optional[Callable] = None


@dataclass
class DampedSystem:
    """dV/dt = M V + F with M = [[0, -A^H], [A, -gamma I]], F = [0; -b], V(0) = 0."""

    M: sp.csr_matrix
    F: np.ndarray
    gamma: float
    sigma_min: float
    T: float
    epsilon: float
    A: sp.csr_matrix
    b: np.ndarray
    sigma_max: Optional[float] = None

    @property
    def dim(self) -> int:
        return self.M.shape[0]

    @property
    def N(self) -> int:
        return self.dim // 2


@dataclass
class PGrid:
    """Periodic grid on [-L, R) for the warped coordinate p."""

    L: float
    R: float
    n_p: int
    dp: float
    nodes: np.ndarray
    nu: np.ndarray

    @property
    def width(self) -> float:
        return self.L + self.R

    @property
    def nu_max(self) -> float:
        return float(np.max(np.abs(self.nu)))


@dataclass
class SchrodSystem:
    """Homogenized, Hermitian-split system lifted to the p-grid."""

    H1: sp.csr_matrix
    H2: sp.csr_matrix
    M_f: sp.csr_matrix
    Vf0: np.ndarray
    T: float
    grid: PGrid
    psi: str
    p_diamond: float
    lambda_max: float
    lambda_min: float

    @property
    def dim(self) -> int:
        return self.H1.shape[0]

    @property
    def N(self) -> int:
        return self.dim // 4


@dataclass
class EvolvedState:
    """Grid function W_h(t) with rows indexed by p-node and columns by component."""

    W: np.ndarray
    norm0: float
    normT: float
    time: float
    recovered_Vf: Optional[np.ndarray] = None
    recovered_v: Optional[np.ndarray] = None

    @property
    def norm_ratio(self) -> float:
        return self.normT / self.norm0 if self.norm0 > 0 else 1.0


@dataclass
class Recovery:
    """Unwarped V_f(t) read off the grid, split into its v, w and r blocks."""

    Vf: np.ndarray
    v: np.ndarray
    w: np.ndarray
    r: np.ndarray
    node_index: int
    p_node: float
    strategy: str


@dataclass
class QueryCostModel:
    """Inputs of the query-count estimator."""

    alpha_H: float
    nu_max: float
    delta: float
    kappa: float
    epsilon: float
    eta0: float
    T: float
    g_repeats: float
    wavenumber: Optional[float] = None

    def __post_init__(self):
        for name in ("alpha_H", "nu_max", "delta", "kappa", "epsilon", "eta0", "T", "g_repeats"):
            if not getattr(self, name) > 0:
                raise ValueError(f"QueryCostModel.{name} must be positive, got {getattr(self, name)}")


@dataclass
class MeasurementReport:
    """
    Success probabilities and repeat count of the measurement chain.

    Pr0, Pr_star, P_proj and Pv follow the full lifted state. The *_head
    fields repeat the chain restricted to the (v, w) block, which leaves out
    the constant T b component.
    """

    Ce: float
    Ce0: float
    Pr0: float
    Pr_star: float
    P_proj: float
    Pv: float
    Pv_estimate: float
    g_repeats: float
    Pr0_head: float = 0.0
    Pr_star_head: float = 0.0
    P_proj_head: float = 0.0
    Pv_head: float = 0.0
    recovery_indices: List[int] = field(default_factory=list)

    def as_dict(self) -> Dict[str, float]:
        return {
            'Ce': self.Ce,
            'Ce0': self.Ce0,
            'Pr0': self.Pr0,
            'Pr_star': self.Pr_star,
            'P_proj': self.P_proj,
            'Pv': self.Pv,
            'Pv_estimate': self.Pv_estimate,
            'Pr0_head': self.Pr0_head,
            'Pr_star_head': self.Pr_star_head,
            'P_proj_head': self.P_proj_head,
            'Pv_head': self.Pv_head,
            'g_repeats': self.g_repeats,
        }


@dataclass
class ExperimentConfig:
    """One end-to-end run of the emulator."""

    k: float = 10.0
    n: int = 4
    m: int = 8
    T: Union[str, float] = "auto"
    psi: str = "cubic"
    precondition: str = "none"
    LR: Union[str, Tuple[float, float]] = "auto"
    epsilon: float = 1e-3
    recovery: str = "point"
    threads: int = 1
    output: str = "output/run"
    strict: bool = False
    seed: int = 0
    series: bool = False
    xlsx: bool = False

    def __post_init__(self):
        if not self.k > 0:
            raise ConfigError(f"k must be positive, got {self.k}")
        if self.n < 1 or self.m < 1:
            raise ConfigError(f"n and m must be >= 1, got n={self.n}, m={self.m}")
        if not 0 < self.epsilon < 1:
            raise ConfigError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if self.T != "auto" and not float(self.T) > 0:
            raise ConfigError(f"T must be 'auto' or positive, got {self.T}")
        if self.psi not in PSI_TAGS:
            raise ConfigError(f"psi must be one of {PSI_TAGS}, got '{self.psi}'")
        if self.precondition not in PRECONDITION_TAGS:
            raise ConfigError(f"precondition must be one of {PRECONDITION_TAGS}, got '{self.precondition}'")
        if self.recovery not in RECOVERY_TAGS:
            raise ConfigError(f"recovery must be one of {RECOVERY_TAGS}, got '{self.recovery}'")
        if self.LR != "auto":
            L, R = self.LR
            if not (L > 0 and R > 0):
                raise ConfigError(f"L and R must be positive, got {self.LR}")
        if self.threads < 1:
            raise ConfigError(f"threads must be >= 1, got {self.threads}")

    @property
    def kh(self) -> float:
        return self.k * 2.0 ** (-self.n)


@dataclass
class ExperimentReport:
    """Files written and headline numbers of one run."""

    config: ExperimentConfig
    files: Dict[str, Path] = field(default_factory=dict)
    summary: Dict[str, float] = field(default_factory=dict)
    v: Optional[np.ndarray] = None
