"""
Command cores: each runs one study from a RunConfig and returns a Report whose
tables are written as CSV (main table plus ``.summary.csv``) or one JSON document.
"""
import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from .base import FrozenModel
from .config import RunConfig
from .errors import ConfigurationError, ContinuationError
from .grid import GridMapSpec, MapKind, build_grid
from .newton import ContinuationRun, check_doubling, continuation_solve
from .richardson import (
    build_table,
    error_estimate,
    exact_on_nodes,
    global_error,
    order_study,
    pointwise_violations,
    restrict_to_coarse,
)
from .scheme import DiscreteSolution

logger = logging.getLogger(__name__)


class Report(FrozenModel):
    command: str
    metadata: Dict[str, Any]
    rows: pd.DataFrame
    summary: pd.DataFrame
    ok: bool = True
    failure: Optional[str] = None

    @property
    def exit_code(self) -> int:
        return 0 if self.ok else 1


def _run(cfg: RunConfig, sizes: Sequence[int]) -> ContinuationRun:
    problem = cfg.make_problem()
    try:
        return continuation_solve(
            problem.system(), cfg.map, sizes, problem.first_guess, cfg.newton_config(),
            ramp=problem.ramp(cfg.parameter_step),
        )
    except ContinuationError as e:
        logger.error(f"[_run] solver failed on N={e.n}: {e}")
        return e.run.model_copy(update={"failed_n": e.n, "failure": str(e)})


def _run_summary(run: ContinuationRun) -> pd.DataFrame:
    rows = [
        {"stage": "parameter", "N": r.N, "iterations": r.iterations, "converged": r.converged,
         "final_update_norm": r.final_update_norm}
        for r in run.parameter_reports
    ]
    reports = list(run.reports) + ([run.failed_report] if run.failed_report is not None else [])
    rows += [
        {"stage": "mesh", "N": r.N, "iterations": r.iterations, "converged": r.converged,
         "final_update_norm": r.final_update_norm}
        for r in reports
    ]
    if run.failed_n is not None and run.failed_report is None:
        rows.append({"stage": "mesh", "N": run.failed_n, "iterations": 0, "converged": False,
                     "final_update_norm": float("nan")})
    return pd.DataFrame(rows, columns=["stage", "N", "iterations", "converged", "final_update_norm"])


def _run_metadata(cfg: RunConfig, command: str, run: Optional[ContinuationRun] = None) -> Dict[str, Any]:
    metadata = {"command": command, **cfg.metadata()}
    if run is not None:
        metadata["path"] = run.path
        metadata["iterations"] = {str(r.N): r.iterations for r in run.reports}
        metadata["failed_n"] = run.failed_n
        metadata["failure"] = run.failure
    return metadata


def _failure_text(run: ContinuationRun) -> Optional[str]:
    return None if run.converged else f"N={run.failed_n}: {run.failure}"


def _solution_rows(solution: DiscreteSolution, exact) -> pd.DataFrame:
    data: Dict[str, Any] = {"n": np.arange(solution.N + 1), "xi": solution.grid.xi, "x": solution.x}
    for i in range(solution.d):
        data[f"U{i + 1}"] = solution.U[:, i]
    error = global_error(solution, exact)
    for i in range(solution.d):
        data[f"e{i + 1}"] = error[:, i]
    return pd.DataFrame(data)


def cmd_solve(cfg: RunConfig) -> Report:
    """
    Solve on every grid of ``n_list``; rows are the nodes of the finest converged grid.

    With ``with_coarse`` the rows gain a leading ``stage`` column and the first
    iterate and accepted solution on the coarsest grid come before the finest grid.
    """
    problem = cfg.make_problem()
    run = _run(cfg, cfg.n_list)
    rows = pd.DataFrame()
    if run.solutions:
        rows = _solution_rows(run.solutions[-1], problem.exact)
        if cfg.with_coarse:
            first = problem.first_guess(build_grid(cfg.map, cfg.n_list[0]))
            stages = {
                "first_iterate": _solution_rows(first, problem.exact),
                "coarse": _solution_rows(run.solutions[0], problem.exact),
                "finest": rows,
            }
            rows = pd.concat([frame.assign(stage=stage) for stage, frame in stages.items()], ignore_index=True)
            rows = rows[["stage", *rows.columns[:-1]]]
    return Report(
        command="solve", metadata=_run_metadata(cfg, "solve", run), rows=rows, summary=_run_summary(run),
        ok=run.converged, failure=_failure_text(run),
    )


def _reference_sizes(cfg: RunConfig) -> List[int]:
    sizes = list(cfg.n_list)
    if cfg.reference_n is None:
        return sizes
    if cfg.reference_n <= sizes[-1]:
        raise ConfigurationError(f"reference N={cfg.reference_n} must exceed the finest grid N={sizes[-1]}")
    while sizes[-1] < cfg.reference_n:
        sizes.append(2 * sizes[-1])
    if sizes[-1] != cfg.reference_n:
        raise ConfigurationError(f"reference N={cfg.reference_n} is not a doubling of N={cfg.n_list[-1]}")
    return sizes


def cmd_converge(cfg: RunConfig) -> Report:
    """
    Errors and observed orders per grid pair and extrapolation level.

    Errors are taken against the exact solution, or against a solve on
    ``reference_n`` when one is configured.
    """
    problem = cfg.make_problem()
    run = _run(cfg, _reference_sizes(cfg))
    solutions = list(run.solutions)
    reference = None
    if cfg.reference_n is not None:
        if run.grid_sizes and run.grid_sizes[-1] == cfg.reference_n:
            reference = solutions.pop()
        else:
            solutions = []
    rows, summary = pd.DataFrame(), pd.DataFrame()
    if len(solutions) >= 2:
        levels = min(cfg.levels, len(solutions) - 1)
        study = order_study(
            solutions, cfg.p0, cfg.order_step, levels,
            exact=problem.exact if reference is None else None, reference=reference,
            norm=cfg.norm, node=cfg.quantity.node,
        )
        d = study.errors.shape[2]
        records = []
        for g in range(len(study.grid_sizes) - 1):
            for k in range(min(g, levels) + 1):
                record: Dict[str, Any] = {"N_coarse": study.grid_sizes[g], "N_fine": study.grid_sizes[g + 1], "level": k}
                for i in range(d):
                    record[f"err{i + 1}_coarse"] = study.errors[g, k, i]
                    record[f"err{i + 1}_fine"] = study.errors[g + 1, k, i]
                    record[f"p{i + 1}"] = study.orders[g, k, i]
                records.append(record)
        rows = pd.DataFrame(records)
        last = study.last_defined_orders()
        summary = pd.DataFrame(
            [{"level": k, "true_order": p_k, **{f"observed_p{i + 1}": last[k, i] for i in range(d)}}
             for k, p_k in enumerate(study.true_orders)]
        )
        for k, p_k in enumerate(study.true_orders):
            logger.info(f"[cmd_converge] level {k}: true order {p_k}, observed {last[k]}")
    elif run.converged:
        raise ConfigurationError("an order study needs at least two grids")
    metadata = _run_metadata(cfg, "converge", run)
    metadata["mode"] = "exact" if reference is None else "reference"
    return Report(command="converge", metadata=metadata, rows=rows, summary=summary,
                  ok=run.converged, failure=_failure_text(run))


def cmd_extrapolate(cfg: RunConfig) -> Report:
    """Triangular extrapolation table of one quantity U_i at a node of the coarsest grid."""
    problem = cfg.make_problem()
    q = cfg.quantity
    if q.node > cfg.n_list[0]:
        raise ConfigurationError(f"node {q.node} is not a node of the coarsest grid N={cfg.n_list[0]}")
    run = _run(cfg, cfg.n_list)
    rows, summary = pd.DataFrame(), pd.DataFrame()
    if run.solutions:
        d = run.solutions[0].d
        if q.component > d:
            raise ConfigurationError(f"component {q.component} does not exist for d={d}")
        raw = [s.U[q.node * (s.N // run.grid_sizes[0]), q.component - 1] for s in run.solutions]
        levels = min(cfg.levels, len(raw) - 1)
        table = build_table(raw, cfg.p0, cfg.order_step, levels, grid_sizes=run.grid_sizes, quantity_label=q.label)
        rows = pd.DataFrame(
            {"g": np.arange(len(table.grid_sizes)), "N": table.grid_sizes,
             **{f"U_k{k}": table.entries[:, k] for k in range(levels + 1)}}
        )
        x_node = float(run.solutions[0].x[q.node])
        exact = float(exact_on_nodes(problem.exact, np.array([x_node]), d)[0, q.component - 1])
        summary = pd.DataFrame(
            [{"level": k, "order": table.orders[k], "N": table.grid_sizes[-1], "value": table.entries[-1, k],
              "exact": exact, "error": exact - table.entries[-1, k]} for k in range(levels + 1)]
        )
    metadata = _run_metadata(cfg, "extrapolate", run)
    metadata["quantity"] = q.label
    return Report(command="extrapolate", metadata=metadata, rows=rows, summary=summary,
                  ok=run.converged, failure=_failure_text(run))


def _estimate_sizes(cfg: RunConfig, pair) -> List[int]:
    coarse, fine = pair
    sizes = [n for n in cfg.n_list if n < coarse] + [coarse, fine]
    try:
        return check_doubling(sizes)
    except ConfigurationError:
        return [coarse, fine]


def cmd_estimate(cfg: RunConfig) -> Report:
    """
    A posteriori estimate E of the error of U_{2N} against its true error e, on the nodes of U_N.
    """
    problem = cfg.make_problem()
    pair = cfg.pair if cfg.pair is not None else tuple(cfg.n_list[-2:])
    if len(pair) != 2:
        raise ConfigurationError("an error estimate needs a pair (N, 2N)")
    run = _run(cfg, _estimate_sizes(cfg, pair))
    rows, summary = pd.DataFrame(), pd.DataFrame()
    if pair[1] in run.grid_sizes:
        coarse, fine = run.solution(pair[0]), run.solution(pair[1])
        estimate = error_estimate(coarse, fine, cfg.p0)
        true_error = exact_on_nodes(problem.exact, coarse.x, coarse.d) - restrict_to_coarse(fine)
        violations = pointwise_violations(estimate, true_error)
        data: Dict[str, Any] = {"n": np.arange(coarse.N + 1), "x": coarse.x}
        for i in range(coarse.d):
            data[f"E{i + 1}"] = estimate.values[:, i]
            data[f"e{i + 1}"] = true_error[:, i]
        rows = pd.DataFrame(data)
        max_e = np.max(np.abs(true_error), axis=0)
        records = []
        for i in range(coarse.d):
            bound = bool(estimate.max_norm[i] >= max_e[i])
            records.append({"component": i + 1, "max_E": estimate.max_norm[i], "max_e": max_e[i],
                            "bound_holds": bound, "pointwise_violations": int(violations[i])})
            if violations[i]:
                logger.warning(
                    f"[cmd_estimate] component {i + 1}: |E| < |e| at {violations[i]} of {coarse.N + 1} nodes"
                )
        summary = pd.DataFrame(records)
    metadata = _run_metadata(cfg, "estimate", run)
    metadata["pair"] = list(pair)
    return Report(command="estimate", metadata=metadata, rows=rows, summary=summary,
                  ok=run.converged, failure=_failure_text(run))


def cmd_grid(cfg: RunConfig) -> Report:
    """Nodes of every grid in ``n_list`` under both maps with the configured c."""
    maps = {kind: GridMapSpec(kind=kind, c=cfg.map.c) for kind in MapKind}
    frames, summary = [], []
    for N in cfg.n_list:
        grids = {kind: build_grid(spec, N) for kind, spec in maps.items()}
        frames.append(pd.DataFrame(
            {"N": N, "n": np.arange(N + 1), "xi": np.arange(N + 1) / N,
             **{f"x_{kind.value}": grid.nodes for kind, grid in grids.items()}}
        ))
        summary.append({"N": N, **{f"last_finite_{kind.value}": grid.nodes[-2] for kind, grid in grids.items()}})
    return Report(command="grid", metadata=_run_metadata(cfg, "grid"), rows=pd.concat(frames, ignore_index=True),
                  summary=pd.DataFrame(summary))


COMMANDS = {
    "solve": cmd_solve,
    "converge": cmd_converge,
    "extrapolate": cmd_extrapolate,
    "estimate": cmd_estimate,
    "grid": cmd_grid,
}


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float):
        if math.isnan(value):
            return None
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
    return value


def report_document(report: Report) -> Dict[str, Any]:
    """The JSON form of a report: metadata, rows and summary as lists of records."""
    return _jsonable({
        "metadata": {**report.metadata, "ok": report.ok},
        "rows": report.rows.to_dict(orient="records"),
        "summary": report.summary.to_dict(orient="records"),
    })


def write_csv(frame: pd.DataFrame, path: Path) -> None:
    frame.to_csv(path, index=False, float_format="%.17g", lineterminator="\n")


def summary_path(path: Path) -> Path:
    return path.with_name(f"{path.stem}.summary.csv")


def write_report(report: Report, cfg: RunConfig) -> List[Path]:
    """
    Write ``report`` in the configured format; existing files are an error unless ``overwrite``.

    :return: the paths written
    """
    path = Path(cfg.output_path) if cfg.output_path is not None else Path(f"{report.command}.{cfg.output}")
    targets = [path] if cfg.output == "json" else [path, summary_path(path)]
    existing = [str(p) for p in targets if p.exists()]
    if existing and not cfg.overwrite:
        raise ConfigurationError(f"output exists: {', '.join(existing)} (use --overwrite)")
    if cfg.output == "json":
        path.write_text(json.dumps(report_document(report), indent=2, allow_nan=False) + "\n")
    else:
        write_csv(report.rows, path)
        write_csv(report.summary, targets[1])
    for target in targets:
        logger.info(f"[write_report] wrote {target}")
    return targets
