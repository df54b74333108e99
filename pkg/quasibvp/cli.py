"""
Command-line front end.

    quasibvp solve --problem colloid --u0 1 --n-list 5,10,20,40 --out solve.csv
    quasibvp extrapolate --u0 7 --quantity comp=2,node=0 --out table.csv
    quasibvp serve --port 8000

Exit status: 0 when every requested solve converged, 1 on solver failure or
non-convergence, 2 on configuration errors.
"""
import argparse
import logging
import sys
from typing import Any, Dict, List, Optional

from .config import build_run_config
from .errors import ConfigurationError, QuasiBvpError
from .reports import COMMANDS, write_report

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_SOLVER, EXIT_CONFIG = 0, 1, 2


def _run_options() -> argparse.ArgumentParser:
    # defaults stay None so that only the flags actually given override the config file
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument("--config", help="YAML file with run settings")
    parent.add_argument("--problem", choices=["colloid", "linear"])
    parent.add_argument("--u0", type=float, help="left boundary value of the colloid problem")
    parent.add_argument("--map", dest="map_kind", choices=["log", "alg"], help="grid generating function")
    parent.add_argument("--c", type=float, help="control parameter of the grid map")
    parent.add_argument("--n-list", help="doubling grid sizes, e.g. 5,10,20,40")
    parent.add_argument("--tol", type=float, help="Newton tolerance on the mean absolute update")
    parent.add_argument("--max-iter", type=int)
    parent.add_argument("--damping", type=float, help="Newton step factor in (0, 1]")
    parent.add_argument("--parameter-step", type=float, help="u0 step of the parameter continuation")
    parent.add_argument("--p0", type=float, help="order of the scheme")
    parent.add_argument("--order-step", type=float, help="p_{k+1} - p_k")
    parent.add_argument("--levels", type=int, help="number of extrapolations")
    parent.add_argument("--quantity", help="comp=<1|2>,node=<int>")
    parent.add_argument("--pair", help="N,2N")
    parent.add_argument("--reference-n", type=int, help="grid of the reference solution")
    parent.add_argument("--norm", choices=["max", "node"])
    parent.add_argument(
        "--with-coarse", action="store_true", default=None,
        help="solve: also write the first iterate and the solution on the coarsest grid",
    )
    parent.add_argument("--format", dest="output", choices=["csv", "json"])
    parent.add_argument("--out", dest="output_path")
    parent.add_argument("--overwrite", action="store_true", default=None)
    parent.add_argument("--log-level", default="WARNING", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    return parent


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="quasibvp", description="Boundary value problems on [0, inf) on quasi-uniform grids")
    sub = parser.add_subparsers(dest="command", required=True)
    parent = _run_options()
    helps = {
        "solve": "solve on a doubling grid sequence and write the finest solution",
        "converge": "errors and observed orders per grid pair and extrapolation level",
        "extrapolate": "Richardson table of one quantity",
        "estimate": "a posteriori error estimate for a pair (N, 2N)",
        "grid": "nodes of both grid maps",
    }
    for name, text in helps.items():
        sub.add_parser(name, parents=[parent], help=text)
    serve = sub.add_parser("serve", help="expose the commands as HTTP tools")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    serve.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    return parser


def overrides_from_args(args: argparse.Namespace) -> Dict[str, Any]:
    keys = [
        "problem", "u0", "n_list", "tol", "max_iter", "damping", "parameter_step", "p0", "order_step",
        "levels", "quantity", "pair", "reference_n", "norm", "with_coarse", "output", "output_path", "overwrite",
    ]
    overrides = {key: getattr(args, key) for key in keys}
    grid_map = {"kind": args.map_kind, "c": args.c}
    overrides["map"] = {k: v for k, v in grid_map.items() if v is not None} or None
    return overrides


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)

    if args.command == "serve":
        from .toolset import build_toolset

        build_toolset().serve(host=args.host, port=args.port)
        return EXIT_OK

    try:
        cfg = build_run_config(args.config, overrides_from_args(args))
        report = COMMANDS[args.command](cfg)
        write_report(report, cfg)
    except ConfigurationError as e:
        logger.error(f"[main] configuration error: {e}")
        return EXIT_CONFIG
    except QuasiBvpError as e:
        logger.error(f"[main] {args.command} failed: {e}")
        return EXIT_SOLVER
    if not report.ok:
        logger.error(f"[main] {args.command} incomplete: {report.failure}")
    return report.exit_code


if __name__ == "__main__":
    sys.exit(main())
