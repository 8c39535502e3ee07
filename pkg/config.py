"""Configuration settings for the Schrodingerized Helmholtz emulator."""

from pathlib import Path

# Project directories
PROJECT_ROOT = Path(__file__).parent
OUTPUT_DIR = PROJECT_ROOT / "output"
SRC_DIR = PROJECT_ROOT / "src"

# Experiment defaults
DEFAULT_K = 10.0
DEFAULT_N = 4
DEFAULT_M = 8
DEFAULT_T = "auto"
DEFAULT_PSI = "cubic"
DEFAULT_PRECONDITION = "none"
DEFAULT_LR = "auto"
DEFAULT_EPSILON = 1e-3
DEFAULT_RECOVERY = "point"
DEFAULT_THREADS = 1

# Share of the target accuracy spent on the stopping time and p-truncation
STOPPING_EPSILON_FRACTION = 1.0 / 3.0
STOPPING_RULE = "envelope"
TIME_QUANTUM = 2.0 ** -10

# p-domain
P_MARGIN = 1.0
MAX_DP = 1.0
RECOVERY_EXP_CAP = 2.0   # e^{p_k} <= e^2 on the recovery index set

# Numerical thresholds
SINGULAR_RTOL = 1e-14
DENSE_SVD_THRESHOLD = 1024
DENSE_EXPM_THRESHOLD = 512
SERIES_DENSE_THRESHOLD = 2048
KRYLOV_DIM = 30
KRYLOV_TOL = 1e-10
ALPHA_HEADROOM = 0.05

# Output settings
CHECKPOINTS = 32
CSV_FLOAT_FORMAT = "%.16e"
OUTPUT_PREFIX_TEMPLATE = "run_k{k:g}_n{n}_m{m}"

# Excel styling
EXCEL_THEME_COLORS = {
    "primary": "4472C4",    # Blue
    "secondary": "70AD47",  # Green
    "accent": "FFC000",     # Orange
    "header_bg": "305496",  # Dark blue
    "header_text": "FFFFFF" # White
}


def get_output_prefix(k: float = DEFAULT_K, n: int = DEFAULT_N, m: int = DEFAULT_M) -> str:
    """Default output prefix for a run."""
    return str(OUTPUT_DIR / OUTPUT_PREFIX_TEMPLATE.format(k=k, n=n, m=m))


def ensure_directories():
    """Create necessary directories if they don't exist."""
    OUTPUT_DIR.mkdir(exist_ok=True)
