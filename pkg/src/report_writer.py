"""CSV serialisation of run results."""

import logging
from pathlib import Path
from typing import Dict, Sequence, Union

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

SOLUTION_COLUMNS = ["x", "Re u_exact", "Im u_exact", "Re v", "Im v"]
SERIES_COLUMNS = ["t", "err_x_inf", "err_u_inf"]


def format_value(value, float_format: str = "%.16e") -> str:
    """Render one metric value; floats use the fixed scientific format."""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return float_format % float(value)
    return str(value)


def solution_frame(x, u_exact, v) -> pd.DataFrame:
    u_exact = np.asarray(u_exact, dtype=complex)
    v = np.asarray(v, dtype=complex)
    return pd.DataFrame({
        "x": np.asarray(x, dtype=float),
        "Re u_exact": u_exact.real,
        "Im u_exact": u_exact.imag,
        "Re v": v.real,
        "Im v": v.imag,
    }, columns=SOLUTION_COLUMNS)


def series_frame(times, err_x, err_u) -> pd.DataFrame:
    return pd.DataFrame({
        "t": np.asarray(times, dtype=float),
        "err_x_inf": np.asarray(err_x, dtype=float),
        "err_u_inf": np.asarray(err_u, dtype=float),
    }, columns=SERIES_COLUMNS)


def write_frame_csv(path: Union[str, Path], df: pd.DataFrame, float_format: str = "%.16e") -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    df.to_csv(path, index=False, float_format=float_format, lineterminator="\n")
    logger.info(f"Wrote {len(df)} rows to {path}")
    return path


def write_metrics_csv(path: Union[str, Path], metrics: Dict, float_format: str = "%.16e") -> Path:
    """Two-column key,value CSV in insertion order."""
    df = pd.DataFrame(
        {"key": list(metrics.keys()), "value": [format_value(v, float_format) for v in metrics.values()]}
    )
    return write_frame_csv(path, df, float_format)


def read_metrics_csv(path: Union[str, Path]) -> Dict[str, str]:
    df = pd.read_csv(path, dtype=str, keep_default_na=False)
    return dict(zip(df["key"], df["value"]))


def checkpoint_times(T: float, count: int = 32, start_fraction: float = 1e-2) -> np.ndarray:
    """Logarithmically spaced times in [start_fraction * T, T], ending exactly at T."""
    times = np.geomspace(start_fraction * T, T, count)
    times[-1] = T
    return times


def max_norm_errors(series: np.ndarray, reference, N: int) -> np.ndarray:
    """||v(t) - reference||_inf for each row of a recovered V_f series."""
    reference = np.asarray(reference)
    return np.max(np.abs(series[:, :N] - reference[None, :]), axis=1)


def study_columns(sweep: str) -> Sequence[str]:
    """Columns charted in the Study sheet for a given sweep."""
    if sweep == "k":
        return ["kappa", "kappa_pa"]
    if sweep == "m":
        return ["err_self"]
    return ["err_x_l2", "err_u_l2"]
