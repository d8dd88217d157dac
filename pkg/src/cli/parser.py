"""
Command-line argument parsing
Subcommand definitions and the small value grammars they accept
"""
import argparse
from typing import List, Optional, Tuple

import numpy as np

from src import __version__
from src.core.errors import InvalidGridSpec
from src.core.modes import (LASSO_MODES, Penalty, Sigma2Method, SimulationMethod, VarianceMode,
                            describe_choices, parse_mode)

DEFAULT_PATH_GRID = "lin:0:50:300"
DEFAULT_GAMMA_GRID = "lin:0.001:0.999:50"
_ESTIMATED = (Sigma2Method.MLR_RESIDUAL, Sigma2Method.REFITTED_CV)


def parse_grid(spec: str) -> np.ndarray:
    """
    Parse a grid specification

    Accepts 'lin:a:b:k' (k evenly spaced values), 'log:a:b:k' (k log-spaced
    values, a and b positive) or a comma-separated list of numbers.

    Raises:
        InvalidGridSpec: If the text does not follow either form
    """
    text = spec.strip()
    kind, _, rest = text.partition(":")
    if kind in ("lin", "log"):
        parts = rest.split(":")
        if len(parts) != 3:
            raise InvalidGridSpec(f"Grid '{spec}' must look like {kind}:start:stop:count")
        try:
            start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
        except ValueError:
            raise InvalidGridSpec(f"Grid '{spec}' has a non-numeric field")
        if count < 1:
            raise InvalidGridSpec(f"Grid '{spec}' needs at least one point")
        if kind == "lin":
            return np.linspace(start, stop, count)
        if start <= 0 or stop <= 0:
            raise InvalidGridSpec(f"Log grid '{spec}' needs positive end points")
        return np.geomspace(start, stop, count)

    try:
        values = np.array([float(v) for v in text.split(",") if v.strip()])
    except ValueError:
        raise InvalidGridSpec(f"Cannot parse grid '{spec}' (use lin:a:b:k, log:a:b:k or a list)")
    if values.size == 0:
        raise InvalidGridSpec("Empty grid")
    return values


def parse_sigma2(text: str) -> Tuple[Sigma2Method, Optional[float]]:
    """Parse 'mlr', 'rcv' or 'fixed:<value>'"""
    kind, _, value = text.strip().partition(":")
    method = parse_mode(Sigma2Method, kind)
    if method is Sigma2Method.FIXED:
        try:
            fixed = float(value)
        except ValueError:
            raise ValueError(f"Fixed residual variance needs a number, e.g. fixed:1.5 (got '{text}')")
        if not fixed > 0:
            raise ValueError(f"Fixed residual variance must be positive, got {fixed}")
        return method, fixed
    if value:
        raise ValueError(f"Only the fixed method takes a value (got '{text}')")
    return method, None


def _grid_arg(text: str) -> np.ndarray:
    try:
        return parse_grid(text)
    except InvalidGridSpec as e:
        raise argparse.ArgumentTypeError(str(e))


def _sigma2_arg(text: str):
    try:
        return parse_sigma2(text)
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e))


def _enum_arg(enum_type):
    def convert(text: str):
        try:
            return parse_mode(enum_type, text)
        except ValueError as e:
            raise argparse.ArgumentTypeError(str(e))
    convert.__name__ = enum_type.__name__
    return convert


def _enum_list_arg(enum_type):
    def convert(text: str):
        try:
            return tuple(parse_mode(enum_type, part) for part in text.split(",") if part.strip())
        except ValueError as e:
            raise argparse.ArgumentTypeError(str(e))
    convert.__name__ = enum_type.__name__
    return convert


def _float_list_arg(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"Expected comma-separated numbers, got '{text}'")


def _name_list_arg(text: str) -> List[str]:
    names = [part.strip() for part in text.split(",") if part.strip()]
    if not names:
        raise argparse.ArgumentTypeError("Expected at least one feature name")
    return names


def _add_input_args(parser: argparse.ArgumentParser):
    source = parser.add_argument_group("input")
    source.add_argument("csv", nargs="?", help="CSV file with a header row")
    source.add_argument("--diabetes", action="store_true",
                        help="use the bundled 442 x 10 diabetes data instead of a CSV")
    source.add_argument("--response", help="response column (default: last column)")


def _add_output_args(parser: argparse.ArgumentParser, plot: bool = False):
    out = parser.add_argument_group("output")
    out.add_argument("--out", metavar="PREFIX",
                     help="write PREFIX.csv, PREFIX.json and PREFIX.manifest.json (default: CSV to stdout)")
    out.add_argument("--manifest", metavar="FILE", help="run manifest path when --out is not given")
    if plot:
        out.add_argument("--plot", metavar="FILE", help="write an SVG plot")


def _add_lasso_args(parser: argparse.ArgumentParser):
    parser.add_argument("--mode", type=_enum_arg(VarianceMode), default=VarianceMode.ASYMPTOTIC,
                        help=describe_choices(VarianceMode, LASSO_MODES, VarianceMode.ASYMPTOTIC))
    parser.add_argument("--fallback-conservative", action="store_true",
                        help="use the conservative variance when the active set is unusable")


def _add_sigma2_arg(parser: argparse.ArgumentParser):
    parser.add_argument("--sigma2", type=_sigma2_arg, default=None, metavar="{mlr|rcv|fixed:<v>}",
                        help="residual variance (default: mlr when d < n, else rcv)")


def build_parser() -> argparse.ArgumentParser:
    """Argument parser with every subcommand"""
    parser = argparse.ArgumentParser(
        prog="penscore",
        description="Penalized score tests for high-dimensional linear regression",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    parser.add_argument("-q", "--quiet", action="store_true", help="warnings and errors only")
    parser.add_argument("--seed", type=int, default=0, help="random seed (default: 0)")
    commands = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    test = commands.add_parser("test", help="lasso score test of every feature at one lambda")
    _add_input_args(test)
    test.add_argument("--lambda", dest="lam", type=float, required=True, help="penalty level")
    _add_lasso_args(test)
    _add_sigma2_arg(test)
    test.add_argument("--compare", action="store_true",
                      help="add simple and multiple regression score-test p-values")
    _add_output_args(test, plot=True)

    path = commands.add_parser("path", help="lasso score tests along a lambda grid")
    _add_input_args(path)
    path.add_argument("--grid", type=_grid_arg, default=parse_grid(DEFAULT_PATH_GRID),
                      help=f"lin:a:b:k, log:a:b:k or a list (default: {DEFAULT_PATH_GRID})")
    _add_lasso_args(path)
    _add_sigma2_arg(path)
    path.add_argument("--mark-lambda", dest="mark_lambda", type=float,
                      help="draw a vertical line at this lambda on the plot")
    _add_output_args(path, plot=True)

    group = commands.add_parser("group-test", help="lasso score test of a group of features at one lambda")
    _add_input_args(group)
    group.add_argument("--features", type=_name_list_arg, required=True,
                       help="comma-separated feature names forming the group")
    group.add_argument("--lambda", dest="lam", type=float, required=True, help="penalty level")
    _add_sigma2_arg(group)
    _add_output_args(group)

    ridge = commands.add_parser("ridge-test", help="ridge score test of every feature")
    _add_input_args(ridge)
    ridge.add_argument("--lambda", dest="lam", type=float, required=True, help="positive ridge penalty")
    _add_sigma2_arg(ridge)
    _add_output_args(ridge)

    simulate = commands.add_parser("simulate", help="type-I error and power simulation study")
    simulate.add_argument("--config", metavar="TOML", help="study settings; flags override file values")
    simulate.add_argument("--n", type=int)
    simulate.add_argument("--d", type=int)
    simulate.add_argument("--signals", dest="n_signals", type=int)
    simulate.add_argument("--signal-value", dest="signal_value", type=float)
    simulate.add_argument("--ar", dest="ar_base", type=float, help="AR(1) correlation between adjacent features")
    simulate.add_argument("--lambdas", type=_float_list_arg, help="comma-separated penalty levels")
    simulate.add_argument("--replications", dest="n_replications", type=int)
    simulate.add_argument("--threshold", type=float, help="p-value cutoff (default: 1/d)")
    simulate.add_argument("--methods", type=_enum_list_arg(SimulationMethod),
                          help="comma-separated subset of: " + describe_choices(SimulationMethod))
    simulate.add_argument("--mode", dest="variance_mode", type=_enum_arg(VarianceMode),
                          help=describe_choices(VarianceMode, LASSO_MODES, VarianceMode.ASYMPTOTIC))
    simulate.add_argument("--sigma2-method", dest="sigma2_method", type=_enum_arg(Sigma2Method),
                          help=describe_choices(Sigma2Method, _ESTIMATED, Sigma2Method.REFITTED_CV)
                          + "; fixed = the true value 1")
    simulate.add_argument("--jobs", dest="n_jobs", type=int, help="parallel workers for replications")
    _add_output_args(simulate, plot=True)

    threshold = commands.add_parser("threshold", help="exact type-I error of the two-variable test")
    threshold.add_argument("--gammas", type=_grid_arg, default=parse_grid(DEFAULT_GAMMA_GRID),
                           help=f"gamma grid (default: {DEFAULT_GAMMA_GRID})")
    threshold.add_argument("--lambda", dest="lam", type=float, default=0.2)
    threshold.add_argument("--rho", type=_float_list_arg, default=[0.5, 0.75])
    threshold.add_argument("--n", type=int, default=500)
    threshold.add_argument("--levels", type=_float_list_arg, default=[0.05, 0.001])
    threshold.add_argument("--modes", type=_enum_list_arg(VarianceMode), default=LASSO_MODES,
                           help=describe_choices(VarianceMode, LASSO_MODES))
    threshold.add_argument("--mc-check", dest="mc_check", type=int, default=0, metavar="N",
                           help="add Monte-Carlo estimates from N draws per point")
    _add_output_args(threshold, plot=True)

    sigma2 = commands.add_parser("sigma2", help="estimate the residual variance")
    _add_input_args(sigma2)
    sigma2.add_argument("--method", type=_enum_arg(Sigma2Method), default=Sigma2Method.MLR_RESIDUAL,
                        help=describe_choices(Sigma2Method, _ESTIMATED, Sigma2Method.MLR_RESIDUAL))
    sigma2.add_argument("--folds", type=int, default=10, help="cross-validation folds for rcv")
    _add_output_args(sigma2)

    verify = commands.add_parser("verify", help="check support against the score-test threshold")
    _add_input_args(verify)
    verify.add_argument("--lambda", dest="lam", type=float, required=True)
    verify.add_argument("--penalty", type=_enum_arg(Penalty), default=Penalty.LASSO,
                        help=describe_choices(Penalty, (Penalty.LASSO, Penalty.ELASTIC_NET), Penalty.LASSO))
    verify.add_argument("--mix", type=float, default=1.0, help="L1 share of the elastic-net penalty")
    _add_output_args(verify)

    return parser
