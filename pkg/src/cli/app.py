"""
PenScore command-line application
Dispatches subcommands to the library and serializes their results
"""
import argparse
import dataclasses
import logging
import sys
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.cli.output import OutputWriter, RunManifest
from src.cli.parser import build_parser
from src.core.data_loader import CsvDatasetReader, load_diabetes_dataset
from src.core.errors import InputError, PenScoreError, Underdetermined
from src.core.modes import LASSO_MODES, Sigma2Method, VarianceMode
from src.core.score_test import (classical_score_test, group_score_test, lasso_score_test_all,
                                 ridge_score_test, verify_sparsity_correspondence)
from src.core.simulation import mlr_p_values, run_study
from src.core.solver import RidgeSmoother, fit_lasso, fit_lasso_path, r_squared
from src.core.threshold import monte_carlo_type1_error, relative_error_curve, scenario_params
from src.core.variance import resolve_sigma2
from src.models.dataset import Dataset, split
from src.models.results import Sigma2Estimate
from src.models.study import SimulationConfig

logger = logging.getLogger(__name__)

# Flags that do not affect results and stay out of the manifest
_NON_RESULT_FLAGS = {"verbose", "quiet", "out", "manifest", "plot"}


class PenScoreApp:
    """Runs one parsed command line"""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.writer = OutputWriter(getattr(args, "out", None), getattr(args, "manifest", None))
        self.inputs: List[Path] = []
        self.handlers = {
            "test": self.cmd_test,
            "path": self.cmd_path,
            "ridge-test": self.cmd_ridge_test,
            "group-test": self.cmd_group_test,
            "simulate": self.cmd_simulate,
            "threshold": self.cmd_threshold,
            "sigma2": self.cmd_sigma2,
            "verify": self.cmd_verify,
        }

    def run(self):
        """Run the selected command and write its manifest"""
        self.handlers[self.args.command]()
        flags = {k: v for k, v in vars(self.args).items() if k not in _NON_RESULT_FLAGS}
        manifest = RunManifest.for_run(self.args.command, flags, self.inputs, self.args.seed)
        self.writer.write_manifest(manifest)

    # ----- shared steps -----

    def load_dataset(self) -> Dataset:
        """Dataset from --diabetes or the CSV argument"""
        if self.args.diabetes:
            if self.args.csv:
                raise InputError("Give either a CSV file or --diabetes, not both")
            return load_diabetes_dataset()
        if not self.args.csv:
            raise InputError("No input: give a CSV file or --diabetes")
        path = Path(self.args.csv)
        if not path.is_file():
            raise InputError(f"No such file: {path}")
        self.inputs.append(path)
        return CsvDatasetReader(self.args.response).load(path)

    def resolve_sigma2(self, dataset: Dataset) -> Sigma2Estimate:
        """Residual variance from --sigma2, defaulting to mlr when d < n"""
        choice = self.args.sigma2
        if choice is None:
            choice = (Sigma2Method.MLR_RESIDUAL if dataset.d < dataset.n - 1 else Sigma2Method.REFITTED_CV, None)
        method, value = choice
        estimate = resolve_sigma2(dataset, method, fixed_value=value, seed=self.args.seed)
        logger.info(f"Residual variance {estimate.value:.6g} ({estimate.method.value})")
        return estimate

    def classical_p_values(self, dataset: Dataset, sigma2: float) -> Tuple[np.ndarray, Optional[np.ndarray]]:
        """Simple-regression p-values, and multiple-regression ones when d < n"""
        empty = np.zeros((dataset.n, 0))
        slr_p = np.array([classical_score_test(dataset.X[:, j], empty, dataset.y, sigma2).p_value
                          for j in range(dataset.d)])
        if dataset.d >= dataset.n:
            logger.warning(f"Skipping multiple regression comparison: {Underdetermined(dataset.n, dataset.d)}")
            return slr_p, None
        return slr_p, mlr_p_values(dataset.X, dataset.y, sigma2)

    # ----- commands -----

    def cmd_test(self):
        """Lasso score test of every feature at one lambda"""
        dataset = self.load_dataset()
        sigma2 = self.resolve_sigma2(dataset).value
        lam = self.args.lam
        full = fit_lasso(dataset.X, dataset.y, lam).require_converged()
        results = lasso_score_test_all(dataset, lam, sigma2, self.args.mode,
                                       fallback_conservative=self.args.fallback_conservative,
                                       full_fit=full)

        logger.info(f"Lasso R^2 at lambda={lam:g}: {r_squared(dataset.y, full.fitted):.3f} "
                    f"({len(full.active)} of {dataset.d} features)")
        if dataset.d < dataset.n:
            ols = np.linalg.lstsq(dataset.X, dataset.y, rcond=None)[0]
            logger.info(f"Multiple regression R^2: {r_squared(dataset.y, dataset.X @ ols):.3f}")
        slr_p = mlr_p = None
        if self.args.compare or self.args.plot:
            slr_p, mlr_p = self.classical_p_values(dataset, sigma2)

        rows = []
        for j, result in enumerate(results):
            row = result.as_row()
            row["in_lasso_support"] = bool(full.coef[j] != 0)
            if self.args.compare:
                row["slr_p_value"] = float(slr_p[j])
                if mlr_p is not None:
                    row["mlr_p_value"] = float(mlr_p[j])
            rows.append(row)
        self.writer.write_table(rows, {"command": "test", "lambda": lam, "sigma2": sigma2,
                                       "lasso_r2": r_squared(dataset.y, full.fitted)})

        if self.args.plot:
            from src.plots.svg_plots import plot_comparison
            plot_comparison([r.p_value for r in results], slr_p, Path(self.args.plot), mlr_p, lam)

    def cmd_path(self):
        """Lasso score tests along a lambda grid, optionally plotted"""
        dataset = self.load_dataset()
        sigma2 = self.resolve_sigma2(dataset).value
        grid = np.unique(self.args.grid)
        if np.any(grid < 0):
            raise InputError("Lambda grid must be non-negative")
        descending = grid[::-1]
        fits = fit_lasso_path(dataset.X, dataset.y, descending)

        results = []
        for lam, full in zip(descending, fits):
            full.require_converged()
            for j, result in enumerate(lasso_score_test_all(
                    dataset, float(lam), sigma2, self.args.mode,
                    fallback_conservative=self.args.fallback_conservative, full_fit=full)):
                results.append((result, bool(full.coef[j] != 0)))
        results.sort(key=lambda item: (item[0].lam, item[0].feature))
        logger.info(f"Computed {len(results)} test(s) over {grid.size} lambda value(s)")

        rows = []
        for result, in_support in results:
            row = result.as_row()
            row["in_lasso_support"] = in_support
            rows.append(row)
        self.writer.write_table(rows, {"command": "path", "sigma2": sigma2, "n": dataset.n})

        if self.args.plot:
            from src.plots.svg_plots import plot_path
            slr_p, mlr_p = self.classical_p_values(dataset, sigma2)
            plot_path([r for r, _ in results], Path(self.args.plot), dataset.n, sigma2,
                      slr_p=slr_p, mlr_p=mlr_p, mark_lambda=self.args.mark_lambda)

    def cmd_group_test(self):
        """Lasso score test of the --features group against the remaining columns"""
        dataset = self.load_dataset()
        try:
            indices = [dataset.index_of(name) for name in self.args.features]
        except KeyError as e:
            raise InputError(f"{e.args[0]} (features: {', '.join(dataset.names)})")
        if len(set(indices)) != len(indices):
            raise InputError("A feature is named twice in the group")
        rest = [j for j in range(dataset.d) if j not in indices]
        sigma2 = self.resolve_sigma2(dataset).value
        lam = self.args.lam

        result = group_score_test(dataset.columns(indices), dataset.columns(rest), dataset.y, lam, sigma2)
        logger.info(f"Group max |T| = {result.max_abs:.4g}, threshold {result.threshold:.4g}: "
                    f"{'enters' if result.decision else 'stays out of'} the lasso support")
        rows = [{
            "feature": dataset.names[j],
            "lambda": lam,
            "t_stat": float(t),
            "p_value": float(p),
            "sigma2": sigma2,
        } for j, t, p in zip(indices, result.t_vec, result.p_values)]
        self.writer.write_table(rows, {"command": "group-test", "lambda": lam, "sigma2": sigma2,
                                       "max_abs": result.max_abs, "threshold": result.threshold,
                                       "in_lasso_support": result.decision})

    def cmd_ridge_test(self):
        """Ridge score test with conditional and marginal p-values"""
        dataset = self.load_dataset()
        sigma2 = self.resolve_sigma2(dataset).value
        lam = self.args.lam
        if not lam > 0:
            raise InputError(f"Ridge penalty must be positive, got {lam}")

        rows = []
        for j in range(dataset.d):
            fsplit = split(dataset, j)
            smoother = RidgeSmoother(fsplit.Z, lam)
            conditional = ridge_score_test(fsplit, dataset.y, lam, sigma2,
                                           VarianceMode.RIDGE_CONDITIONAL, smoother)
            marginal = ridge_score_test(fsplit, dataset.y, lam, sigma2,
                                        VarianceMode.RIDGE_MARGINAL, smoother)
            rows.append({
                "feature": fsplit.name,
                "lambda": lam,
                "t_stat": conditional.t_stat,
                "conditional_variance": conditional.variance,
                "conditional_p_value": conditional.p_value,
                "marginal_variance": marginal.variance,
                "marginal_p_value": marginal.p_value,
                "df": smoother.df,
                "sigma2": sigma2,
            })
        self.writer.write_table(rows, {"command": "ridge-test", "lambda": lam, "sigma2": sigma2})

    def simulation_config(self) -> SimulationConfig:
        """Settings from --config overridden by explicit flags"""
        values: Dict = {}
        if self.args.config:
            path = Path(self.args.config)
            self.inputs.append(path)
            with open(path, "rb") as handle:
                document = tomllib.load(handle)
            values.update(document.get("simulation", document))
        for key in ("n", "d", "n_signals", "signal_value", "ar_base", "lambdas", "n_replications",
                    "threshold", "methods", "variance_mode", "sigma2_method", "n_jobs"):
            value = getattr(self.args, key)
            if value is not None:
                values[key] = value
        values.setdefault("seed", self.args.seed)
        missing = [k for k in ("n", "d") if k not in values]
        if missing:
            raise InputError(f"Simulation needs {' and '.join(missing)} (flags or --config)")
        try:
            return SimulationConfig.from_mapping(values)
        except (TypeError, ValueError) as e:
            raise InputError(f"Invalid simulation settings: {e}")

    def cmd_simulate(self):
        """Simulation study summary"""
        config = self.simulation_config()
        summary = run_study(config)
        self.writer.write_table(summary.as_rows(), {"command": "simulate", **summary.to_dict()})
        if self.args.plot:
            from src.plots.svg_plots import plot_simulation
            plot_simulation(summary, Path(self.args.plot))

    def cmd_threshold(self):
        """Exact relative type-I error curves"""
        args = self.args
        modes = [m for m in args.modes if m in LASSO_MODES]
        if len(modes) != len(args.modes):
            raise InputError("Threshold analysis takes only asymptotic and conservative modes")
        gammas = np.asarray(args.gammas, dtype=float)

        points = []
        rows = []
        for rho in args.rho:
            curve = relative_error_curve(gammas, args.lam, rho, args.n, args.levels, modes)
            if args.mc_check:
                scenarios = {g: scenario_params(g, args.lam, rho, args.n) for g in gammas}
                checks = {
                    g: monte_carlo_type1_error(s, args.levels, modes, args.mc_check, seed=args.seed + k)
                    for k, (g, s) in enumerate(scenarios.items())
                }
                curve = [
                    dataclasses.replace(p, mc_estimate=checks[p.gamma][(p.nominal_level, p.variance_mode)][0],
                                        mc_se=checks[p.gamma][(p.nominal_level, p.variance_mode)][1])
                    for p in curve
                ]
            points += curve
            rows += [p.as_row() for p in curve]

        extra = {"command": "threshold", "lambda": args.lam, "n": args.n}
        self.writer.write_table(rows, extra)
        if args.plot:
            from src.plots.svg_plots import plot_error_curves
            plot_error_curves(points, Path(args.plot))

    def cmd_sigma2(self):
        """Residual variance estimate"""
        dataset = self.load_dataset()
        estimate = resolve_sigma2(dataset, self.args.method, seed=self.args.seed, folds=self.args.folds)
        rows = [{"sigma2": estimate.value, "method": estimate.method.value, "df_used": estimate.df_used}]
        self.writer.write_table(rows, {"command": "sigma2", "n": dataset.n, "d": dataset.d})

    def cmd_verify(self):
        """Support versus score-test threshold, feature by feature"""
        dataset = self.load_dataset()
        report = verify_sparsity_correspondence(dataset, self.args.lam, self.args.penalty, self.args.mix)
        rows = [
            {
                "feature": name,
                "in_support": support,
                "exceeds_threshold": exceeds,
                "margin": margin,
                "tie": tie,
                "agree": agree,
            }
            for name, support, exceeds, margin, tie, agree in zip(
                dataset.names, report.in_support, report.exceeds, report.margins,
                report.ties, report.agreements)
        ]
        self.writer.write_table(rows, {"command": "verify", "lambda": report.lam,
                                       "threshold": report.threshold, "all_agree": report.all_agree})
        if report.all_agree:
            logger.info(f"Support and threshold agree on all {dataset.d} feature(s)")


def configure_logging(verbose: bool = False, quiet: bool = False):
    """Root logger on standard error"""
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.basicConfig(stream=sys.stderr,
                        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s")
    logging.getLogger().setLevel(level)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Parse arguments, run the command and map errors to exit codes

    Returns:
        0 on success, 1 on a library error (argparse exits with 2 on usage errors)
    """
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose, args.quiet)
    try:
        PenScoreApp(args).run()
    except (PenScoreError, ValueError, OSError) as e:
        logger.error(str(e))
        return 1
    return 0
