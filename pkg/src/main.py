"""Main script to run the Schrodingerized Helmholtz pipeline."""

import argparse
import sys
import logging
from dataclasses import replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.sparse.linalg import spsolve

# Add parent directory to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent))

import config
from src.errors import ConfigError, DomainError, NumericalError
from src.models import ExperimentConfig, ExperimentReport, HelmholtzProblem, PSI_TAGS, PRECONDITION_TAGS, RECOVERY_TAGS
from src.helmholtz import build_preconditioned, build_system, exact_solution
from src.dds import build_damped
from src.schrod import build_schrod_system, evolve, evolve_series, init_profile, recover
from src.diagnostics import (
    build_cost_model,
    condition_report,
    error_metrics,
    fit_decay_rate,
    fit_order,
    measurement_report,
    pairwise_orders,
    query_cost
)
from src.report_writer import (
    checkpoint_times,
    max_norm_errors,
    series_frame,
    solution_frame,
    study_columns,
    write_frame_csv,
    write_metrics_csv
)
from src.excel_generator import ExcelGenerator

logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger(__name__)

PRECONDITION_MODES = {
    "none": "none",
    "real": "real_shift",
    "imag": "imaginary_shift",
}

SWEEPS = {
    "n": int,
    "m": int,
    "k": float,
}

BOOLEAN_KEYS = ("strict", "series", "xlsx")


def _banner(title: str):
    logger.info("=" * 60)
    logger.info(title)
    logger.info("=" * 60)


def assemble_helmholtz(cfg: ExperimentConfig):
    """Assemble A x = b and the discrete and exact reference solutions."""
    _banner("Step 1: Assembling dispersion-corrected Helmholtz system")

    problem = HelmholtzProblem(k=cfg.k, n=cfg.n)
    system = build_system(
        problem,
        singular_rtol=config.SINGULAR_RTOL,
        dense_threshold=config.DENSE_SVD_THRESHOLD
    )

    x = spsolve(system.A.tocsc(), system.b)
    u = exact_solution(cfg.k, system.grid)

    logger.info(f"N={system.N}, kh={problem.kh:.6g}, k_hat={system.k_hat:.10g}")

    return system, x, u


def precondition(system, cfg: ExperimentConfig):
    """Apply the shifted-Laplacian preconditioner (or pass A through)."""
    _banner("Step 2: Preconditioning")

    mode = PRECONDITION_MODES[cfg.precondition]
    preconditioned = build_preconditioned(system, mode)

    logger.info(f"mode={mode}, kappa={preconditioned.kappa_estimate:.6g}")

    return preconditioned


def build_dynamics(preconditioned, cfg: ExperimentConfig):
    """Build the critically damped first-order system."""
    _banner("Step 3: Building damped dynamical system")

    T = None if cfg.T == "auto" else float(cfg.T)
    return build_damped(
        preconditioned.PA,
        preconditioned.Pb,
        cfg.epsilon * config.STOPPING_EPSILON_FRACTION,
        T=T,
        stopping_rule=config.STOPPING_RULE,
        time_quantum=config.TIME_QUANTUM,
        dense_threshold=config.DENSE_SVD_THRESHOLD
    )


def schrodingerize(damped, cfg: ExperimentConfig):
    """Homogenize, split and choose the p-grid."""
    _banner("Step 4: Schrodingerizing")

    return build_schrod_system(
        damped,
        cfg.epsilon * config.STOPPING_EPSILON_FRACTION,
        psi=cfg.psi,
        m=cfg.m,
        LR=None if cfg.LR == "auto" else cfg.LR,
        margin=config.P_MARGIN,
        strict=cfg.strict
    )


def evolve_and_recover(schrod, cfg: ExperimentConfig):
    """Evolve every Fourier mode to T and read v(T) off the p-grid."""
    _banner("Step 5: Evolving and recovering")

    W0 = init_profile(schrod.psi, schrod.grid, schrod.Vf0)
    state = evolve(
        schrod,
        W0,
        threads=cfg.threads,
        dense_threshold=config.DENSE_EXPM_THRESHOLD,
        krylov_dim=config.KRYLOV_DIM,
        tol=config.KRYLOV_TOL
    )
    recovery = recover(state, schrod, strategy=cfg.recovery)

    return W0, state, recovery


def analyze_run(cfg, system, preconditioned, damped, schrod, state, recovery, x, u) -> Dict:
    """Collect errors, probabilities and cost estimates into one ordered dict."""
    _banner("Step 6: Computing diagnostics")

    err_x = error_metrics(recovery.v, x)
    err_u = error_metrics(recovery.v, u)
    discretization = error_metrics(x, u)
    condition = condition_report(system.A, dense_threshold=config.DENSE_SVD_THRESHOLD)

    report = measurement_report(
        state,
        schrod.grid,
        schrod.psi,
        damped.b,
        damped.T,
        p_diamond=schrod.p_diamond,
        exp_cap=config.RECOVERY_EXP_CAP
    )
    model = build_cost_model(
        schrod,
        state,
        report,
        cfg.epsilon,
        kappa=preconditioned.kappa_estimate,
        wavenumber=cfg.k,
        headroom=config.ALPHA_HEADROOM,
        dense_threshold=config.DENSE_SVD_THRESHOLD
    )
    costs = query_cost(model)

    N = schrod.N
    Tb = damped.T * damped.b
    r_block_err = float(np.linalg.norm(recovery.r[N:] + Tb) / np.linalg.norm(Tb))

    metrics = {
        'k': cfg.k,
        'n': cfg.n,
        'm': cfg.m,
        'kh': cfg.kh,
        'N': system.N,
        'k_hat': system.k_hat,
        'psi': cfg.psi,
        'precondition': cfg.precondition,
        'recovery': cfg.recovery,
        'epsilon': cfg.epsilon,
        'seed': cfg.seed,
        'sigma_min_A': condition['sigma_min'],
        'sigma_max_A': condition['sigma_max'],
        'kappa': condition['kappa'],
        'kappa_pa': preconditioned.kappa_estimate,
        'sigma_min': damped.sigma_min,
        'gamma': damped.gamma,
        'T': damped.T,
        'L': schrod.grid.L,
        'R': schrod.grid.R,
        'n_p': schrod.grid.n_p,
        'dp': schrod.grid.dp,
        'nu_max': schrod.grid.nu_max,
        'p_diamond': schrod.p_diamond,
        'p_node': recovery.p_node,
        'norm0': state.norm0,
        'normT': state.normT,
        'norm_ratio': state.norm_ratio,
        'err_x_l2': err_x['l2_rel'],
        'err_x_linf': err_x['linf_rel'],
        'err_u_l2': err_u['l2_rel'],
        'err_u_linf': err_u['linf_rel'],
        'disc_err_u_l2': discretization['l2_rel'],
        'r_block_err': r_block_err,
    }
    metrics.update(report.as_dict())
    metrics.update({
        'alpha_H': model.alpha_H,
        'delta': model.delta,
    })
    metrics.update(costs)

    logger.info("Analysis complete")

    return metrics


def record_series(schrod, W0, recovery, x, u) -> pd.DataFrame:
    """||v(t) - x||_inf and ||v(t) - u||_inf at logarithmically spaced checkpoints."""
    _banner("Step 7: Recording checkpoint time series")

    times = checkpoint_times(schrod.T, config.CHECKPOINTS)
    series = evolve_series(
        schrod,
        W0,
        times,
        recovery.node_index,
        dense_threshold=config.SERIES_DENSE_THRESHOLD
    )
    return series_frame(
        times,
        max_norm_errors(series, x, schrod.N),
        max_norm_errors(series, u, schrod.N)
    )


def _tail_rate(series: pd.DataFrame, column: str) -> float:
    half = len(series) // 2
    try:
        return fit_decay_rate(series['t'].values[half:], series[column].values[half:])
    except ValueError:
        return float('nan')


def write_outputs(cfg: ExperimentConfig, system, u, recovery, metrics: Dict,
                  series: Optional[pd.DataFrame]) -> Dict[str, Path]:
    """Write the solution, metrics and optional series CSVs (and workbook)."""
    _banner("Step 8: Writing outputs")

    prefix = str(cfg.output)
    solution = solution_frame(system.grid, u, recovery.v)

    files = {
        'solution': write_frame_csv(f"{prefix}_solution.csv", solution, config.CSV_FLOAT_FORMAT),
        'metrics': write_metrics_csv(f"{prefix}_metrics.csv", metrics, config.CSV_FLOAT_FORMAT),
    }
    if series is not None:
        files['series'] = write_frame_csv(f"{prefix}_series.csv", series, config.CSV_FLOAT_FORMAT)

    if cfg.xlsx:
        generator = ExcelGenerator(Path(f"{prefix}.xlsx"), config.EXCEL_THEME_COLORS)
        generator.create_summary_sheet(metrics)
        generator.create_solution_sheet(solution)
        if series is not None:
            generator.create_series_sheet(series)
        generator.save()
        files['xlsx'] = Path(f"{prefix}.xlsx")

    return files


def run_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    """Build, damp, Schrodingerize, evolve, recover and report one configuration."""
    logger.info(f"Starting run: k={cfg.k}, n={cfg.n}, m={cfg.m}, psi={cfg.psi}, "
                f"precondition={cfg.precondition}")

    system, x, u = assemble_helmholtz(cfg)
    preconditioned = precondition(system, cfg)
    damped = build_dynamics(preconditioned, cfg)
    schrod = schrodingerize(damped, cfg)
    W0, state, recovery = evolve_and_recover(schrod, cfg)

    metrics = analyze_run(cfg, system, preconditioned, damped, schrod, state, recovery, x, u)

    series = None
    if cfg.series:
        series = record_series(schrod, W0, recovery, x, u)
        metrics['rate_x'] = _tail_rate(series, 'err_x_inf')
        metrics['rate_u'] = _tail_rate(series, 'err_u_inf')

    files = write_outputs(cfg, system, u, recovery, metrics, series)

    return ExperimentReport(config=cfg, files=files, summary=metrics, v=recovery.v)


STUDY_KEYS = (
    'n', 'kh', 'N', 'T', 'dp', 'sigma_min', 'kappa', 'kappa_pa',
    'err_x_l2', 'err_x_linf', 'err_u_l2', 'err_u_linf', 'disc_err_u_l2',
    'norm_ratio', 'g_repeats', 'be_queries', 'sp_queries', 'headline_kappa',
    'rate_x', 'rate_u',
)


def _safe_order(steps, errors) -> float:
    try:
        return fit_order(steps, errors)
    except ValueError:
        return float('nan')


def _mesh_for_fixed_kh(base: ExperimentConfig, k: float) -> int:
    """Mesh exponent keeping kh equal to the base run's: n = base.n + log2(k / base.k)."""
    shift = np.log2(k / base.k)
    if not np.isclose(shift, round(shift), rtol=0, atol=1e-9):
        raise ConfigError(f"k-sweep at fixed kh needs k/{base.k:g} to be a power of two, got k={k:g}")
    n = base.n + int(round(shift))
    if n < 1:
        raise ConfigError(f"k={k:g} would need mesh exponent n={n}")
    return n


def run_convergence_study(
    base: ExperimentConfig,
    sweep: str,
    values: Sequence
) -> Tuple[pd.DataFrame, Path]:
    """
    Run one experiment per sweep value and tabulate errors, rates and costs.

    n-sweeps fit the order of the error against u in h; m-sweeps use the
    finest run as reference and fit the self-convergence order in dp;
    k-sweeps move n with k so that kh stays at the base value, and fit the
    log-log slopes of kappa(A) and kappa(PA) in k. Every run records the
    checkpoint series (when the lifted system is small enough) so the table
    carries the fitted rates in t.
    """
    if sweep not in SWEEPS:
        raise ConfigError(f"sweep must be one of {tuple(SWEEPS)}, got '{sweep}'")
    if not values:
        raise ConfigError("sweep values must be nonempty")

    rows = []
    solutions = []
    for value in values:
        try:
            value = SWEEPS[sweep](value)
        except ValueError:
            raise ConfigError(f"invalid {sweep}-sweep value '{value}'")
        overrides = {sweep: value}
        if sweep == "k":
            overrides['n'] = _mesh_for_fixed_kh(base, value)
        n = overrides.get('n', base.n)
        overrides.update({
            'output': f"{base.output}_{sweep}{value:g}",
            'xlsx': False,
            'series': base.series or 4 * 2 ** n <= config.SERIES_DENSE_THRESHOLD,
        })
        report = run_experiment(replace(base, **overrides))

        row = {sweep: value}
        row.update({key: report.summary[key] for key in STUDY_KEYS if key in report.summary})
        rows.append(row)
        solutions.append(report.v)

    study = pd.DataFrame(rows)

    if sweep == "n":
        h = 2.0 ** -study['n'].values.astype(float)
        study['order_u'] = pairwise_orders(h, study['err_u_l2'].values)
        study['sweep_slope'] = _safe_order(h, study['err_u_l2'].values)
    elif sweep == "m":
        reference = solutions[-1]
        err_self = np.array([np.linalg.norm(v - reference) / np.linalg.norm(reference) for v in solutions])
        study['err_self'] = err_self
        study['order_self'] = pairwise_orders(study['dp'].values, err_self)
        study['sweep_slope'] = _safe_order(study['dp'].values[:-1], err_self[:-1])
    else:
        study['sweep_slope'] = _safe_order(study['k'].values, study['kappa'].values)
        study['sweep_slope_pa'] = _safe_order(study['k'].values, study['kappa_pa'].values)

    path = write_frame_csv(f"{base.output}_study_{sweep}.csv", study, config.CSV_FLOAT_FORMAT)

    if base.xlsx:
        generator = ExcelGenerator(Path(f"{base.output}_study_{sweep}.xlsx"), config.EXCEL_THEME_COLORS)
        generator.create_study_sheet(study, sweep, study_columns(sweep))
        generator.save()

    return study, path


def parse_config_file(path) -> Dict[str, str]:
    """Read a flat key=value file; '#' starts a comment, keys are long flag names."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")

    values = {}
    for lineno, raw in enumerate(path.read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got '{raw.strip()}'")
        key, value = (part.strip() for part in line.split("=", 1))
        values[key.lstrip("-").replace("-", "_")] = value
    return values


def _parse_bool(key: str, value: str) -> bool:
    lowered = value.lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"'{key}' expects a boolean, got '{value}'")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="Classical emulator of the Schrodingerized damped-dynamics Helmholtz solver"
    )
    parser.add_argument("--config", type=Path, help="flat key=value file with flag defaults")
    parser.add_argument("--k", type=float, default=config.DEFAULT_K, help="wavenumber")
    parser.add_argument("--n", type=int, default=config.DEFAULT_N, help="mesh exponent, h = 2^-n")
    parser.add_argument("--m", type=int, default=config.DEFAULT_M, help="p-grid exponent, N_p = 2^m")
    parser.add_argument("--t", default=config.DEFAULT_T, help="stopping time or 'auto'")
    parser.add_argument("--psi", choices=PSI_TAGS, default=config.DEFAULT_PSI)
    parser.add_argument("--precondition", choices=PRECONDITION_TAGS, default=config.DEFAULT_PRECONDITION)
    parser.add_argument("--lr", default=config.DEFAULT_LR, help="'auto' or 'L,R'")
    parser.add_argument("--epsilon", type=float, default=config.DEFAULT_EPSILON)
    parser.add_argument("--recovery", choices=RECOVERY_TAGS, default=config.DEFAULT_RECOVERY)
    parser.add_argument("--threads", type=int, default=config.DEFAULT_THREADS)
    parser.add_argument("--out", default=None, help="output path prefix")
    parser.add_argument("--strict", action="store_true", help="treat a coarse p-grid as an error")
    parser.add_argument("--series", action="store_true", help="write the checkpoint time series")
    parser.add_argument("--xlsx", action="store_true", help="also write an Excel workbook")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--study", choices=tuple(SWEEPS), help="run a convergence study over this parameter")
    parser.add_argument("--values", default="", help="comma-separated sweep values")
    return parser


def parse_args(argv: Optional[List[str]] = None) -> argparse.Namespace:
    """Parse flags, with --config file values as defaults under the command line."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config", type=Path)
    known, _ = pre.parse_known_args(argv)

    parser = build_parser()
    if known.config is not None:
        file_values = parse_config_file(known.config)
        dests = {action.dest for action in parser._actions}
        unknown = sorted(set(file_values) - dests)
        if unknown:
            raise ConfigError(f"unknown keys in {known.config}: {', '.join(unknown)}")
        defaults = {
            key: _parse_bool(key, value) if key in BOOLEAN_KEYS else value
            for key, value in file_values.items()
        }
        parser.set_defaults(**defaults)

    return parser.parse_args(argv)


def _parse_lr(text: str):
    if text == "auto":
        return "auto"
    try:
        L, R = (float(part) for part in text.split(","))
    except ValueError:
        raise ConfigError(f"--lr expects 'auto' or 'L,R', got '{text}'")
    return (L, R)


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    """Turn parsed flags into a validated ExperimentConfig."""
    try:
        T = "auto" if str(args.t) == "auto" else float(args.t)
        k = float(args.k)
        n = int(args.n)
        m = int(args.m)
        epsilon = float(args.epsilon)
        threads = int(args.threads)
        seed = int(args.seed)
    except ValueError as e:
        raise ConfigError(f"invalid numeric option: {e}")

    return ExperimentConfig(
        k=k,
        n=n,
        m=m,
        T=T,
        psi=args.psi,
        precondition=args.precondition,
        LR=_parse_lr(str(args.lr)),
        epsilon=epsilon,
        recovery=args.recovery,
        threads=threads,
        output=args.out or config.get_output_prefix(k, n, m),
        strict=bool(args.strict),
        seed=seed,
        series=bool(args.series),
        xlsx=bool(args.xlsx)
    )


def print_summary(report: ExperimentReport):
    """Print summary statistics to console."""
    logger.info("=" * 60)
    logger.info("SUMMARY")
    logger.info("=" * 60)

    s = report.summary
    print("\n" + "=" * 60)
    print("Schrodingerized Helmholtz run - Summary")
    print("=" * 60)
    print(f"\nk = {s['k']:g}, n = {s['n']} (N = {s['N']}, kh = {s['kh']:.4g}), m = {s['m']}")
    print(f"psi = {s['psi']}, precondition = {s['precondition']}, recovery = {s['recovery']}")
    print(f"\nkappa(A) = {s['kappa']:.4g}, kappa(PA) = {s['kappa_pa']:.4g}")
    print(f"T = {s['T']:.6g}, gamma = {s['gamma']:.4g}")
    print(f"p-domain [-{s['L']:.4g}, {s['R']:.4g}), dp = {s['dp']:.4g}")
    print(f"\nRelative error vs discrete solution: {s['err_x_l2']:.4e}")
    print(f"Relative error vs exact solution:    {s['err_u_l2']:.4e}")
    print(f"Norm ratio ||W(T)||/||W(0)||:        {s['norm_ratio']:.15f}")
    print(f"\nPv = {s['Pv']:.4e}, g = {s['g_repeats']:.4g}")
    print(f"Block-encoding queries: {s['be_queries']:.4e}")

    print("\n" + "=" * 60)
    print("Outputs saved to:")
    for path in report.files.values():
        print(f"{path}")
    print("=" * 60 + "\n")


def main(argv: Optional[List[str]] = None) -> int:
    """Run the pipeline; returns 0, 2 on configuration errors, 3 on numerical failures."""
    try:
        args = parse_args(argv)
        cfg = config_from_args(args)

        if cfg.output == config.get_output_prefix(cfg.k, cfg.n, cfg.m):
            config.ensure_directories()

        if args.study:
            values = [v for v in args.values.split(",") if v.strip()]
            study, path = run_convergence_study(cfg, args.study, values)
            print(study.to_string(index=False))
            print(f"\nStudy table saved to: {path}")
        else:
            report = run_experiment(cfg)
            print_summary(report)

        logger.info("Pipeline complete!")
        return 0

    except (ConfigError, DomainError) as e:
        logger.error(f"Configuration error: {e}", exc_info=True)
        return 2
    except (NumericalError, ValueError) as e:
        logger.error(f"Numerical failure: {e}", exc_info=True)
        return 3


if __name__ == "__main__":
    sys.exit(main())
