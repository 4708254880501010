"""Scenario execution: run one configuration or sweep the data amplitude.

This is the engine behind the service endpoints.  All artifacts are returned
as strings/records; writing files is the client's business.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor


from . import diagnostics as dg
from . import solver as sv
from .config import build_problem
from .errors import ConfigurationError

__all__ = ["execute_run", "execute_sweep", "csv_from_rows"]


def _solve(cfg, data):
    try:
        sol, tel = sv.continuation_solve(
            data,
            schedule=cfg.solver.alpha_schedule,
            theta=cfg.solver.damping,
            tol_res=cfg.solver.tol_res,
            max_iterations=cfg.solver.max_iterations,
            max_refinements=cfg.solver.max_refinements,
            memory_nodes=cfg.density.memory_nodes,
        )
        return sol, tel, "converged"
    except sv.NonconvergenceError as err:
        return err.last_solution, err.telemetry, "nonconverged"


def csv_from_rows(rows):
    """Serialize a list of flat dicts sharing the first row's key order."""
    if not rows:
        return ""
    header = list(rows[0].keys())
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_cell(row.get(key)) for key in header))
    return "\n".join(lines) + "\n"


def _cell(value):
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def execute_run(cfg, amplitude_scale=None, linear_response_ratio=None):
    """Run one scenario; diagnostics are produced even on nonconvergence."""
    density, basis, modes, data = build_problem(cfg, amplitude_scale=amplitude_scale)
    sol, tel, status = _solve(cfg, data)
    suite = dg.estimate_suite(sol, data, memory_nodes=cfg.density.memory_nodes)
    report = dg.build_report(
        suite, tel, config=cfg.effective_dict(), linear_response_ratio=linear_response_ratio
    )
    flat = dg.flatten_report(report)
    norms_csv = csv_from_rows([flat])
    probes_csv = None
    if cfg.output.probes and cfg.output.probe_series:
        header, rows = dg.build_probe_series(
            sol, data, cfg.output.probes, memory_nodes=cfg.density.memory_nodes
        )
        lines = [",".join(header)]
        lines += [",".join(repr(float(v)) for v in row) for row in rows]
        probes_csv = "\n".join(lines) + "\n"
    return {
        "status": status,
        "report": report,
        "norms_csv": norms_csv,
        "probes_csv": probes_csv,
        "solution_norm": sol.norm(),
    }


def execute_sweep(cfg, values, threads=1):
    """Run the scenario at a list of target data amplitudes.

    Each row rescales the configured forcing so that its computed amplitude
    hits the requested value (the amplitude is degree-one homogeneous in the
    data).  Per-row failures are recorded in the row; the sweep continues.
    The largest value that converged inside the confinement radius is marked
    as the empirical threshold.
    """
    _, _, _, base = build_problem(cfg, amplitude_scale=1.0)
    delta_unit = base.delta
    values = [float(v) for v in values]

    def run_one(value):
        if value == 0.0:
            scale = 0.0
        elif delta_unit == 0.0:
            raise ConfigurationError("cannot rescale identically-zero data to a nonzero amplitude")
        else:
            scale = value / delta_unit
        result = execute_run(cfg, amplitude_scale=scale)
        report = result["report"]
        row = {
            "target_delta": value,
            "delta": report["delta"],
            "converged": report["solver"]["converged"],
            "confined": report["confinement"]["max_abs_p"] <= report["confinement"]["R"],
            "coincides": report["confinement"]["coincides"],
            "max_abs_p": report["confinement"]["max_abs_p"],
            "R": report["confinement"]["R"],
            "solution_norm": result["solution_norm"],
            "residual_final": report["solver"]["residual_final"],
            "iterations": report["solver"]["iterations"],
            "es1_inequality_slack": report["energy"]["es1_inequality"]["slack"],
            "ene2_min_slack": report["energy"]["ene2"]["min_slack"],
            "ene2_eps_grid": report["energy"]["ene2"]["eps_grid"],
            "ene3_value": report["energy"]["ene3"]["value"],
            "ene3_eps_grid": report["energy"]["ene3"]["eps_grid"],
        }
        for key, val in dg.flatten_report({"norms": report["norms"]}).items():
            row[key] = val
        return row

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(run_one, values))
    else:
        rows = [run_one(v) for v in values]

    eligible = [r["target_delta"] for r in rows if r["converged"] and r["confined"]]
    delta_star = max(eligible) if eligible else None
    for row in rows:
        row["is_empirical_delta_star"] = delta_star is not None and row["target_delta"] == delta_star
        half = row["target_delta"] / 2.0
        mate = next(
            (r for r in rows if r is not row and abs(r["target_delta"] - half) <= 1e-9 * max(half, 1e-300)),
            None,
        )
        if mate is not None and mate["solution_norm"] > 0:
            row["linear_response_ratio"] = row["solution_norm"] / mate["solution_norm"]
        else:
            row["linear_response_ratio"] = None
    return {
        "rows": rows,
        "csv": csv_from_rows(rows),
        "empirical_delta_star": delta_star,
    }
