"""FastAPI service exposing scenario validation, runs and amplitude sweeps.

The core package stays import-only; this module is the wire boundary.
Malformed request bodies fail pydantic validation (422); well-formed
configurations that violate an admissibility condition map to 400 with the
offending detail.  Solver nonconvergence is a regular response with
``status = "nonconverged"`` so clients can keep the diagnostics.
"""

from __future__ import annotations

from typing import Literal, Optional

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel

from . import __version__
from . import hysteresis as hy
from .config import ScenarioConfig, build_density
from .errors import ConfigurationError, DensityValidationError, GridError
from .runner import execute_run, execute_sweep

app = FastAPI(title="porowave", version=__version__)


class ValidateRequest(BaseModel):
    config: ScenarioConfig


class ValidateResponse(BaseModel):
    ok: bool
    delta: float
    density_constants: dict
    eigenvalues: dict


class RunRequest(BaseModel):
    config: ScenarioConfig


class RunResponse(BaseModel):
    status: Literal["converged", "nonconverged"]
    report: dict
    norms_csv: str
    probes_csv: Optional[str] = None


class SweepRequest(BaseModel):
    config: ScenarioConfig
    param: Literal["delta"] = "delta"
    values: list[float]
    threads: int = 1


class SweepResponse(BaseModel):
    rows: list[dict]
    csv: str
    empirical_delta_star: Optional[float] = None


def _bad_request(err):
    detail = str(err)
    if isinstance(err, DensityValidationError) and err.suggested_R is not None:
        detail += f" (suggested R: {err.suggested_R:.6g})"
    return HTTPException(status_code=400, detail=detail)


@app.get("/healthz")
def healthz():
    return {"status": "ok", "version": __version__}


@app.post("/validate", response_model=ValidateResponse)
def validate(req: ValidateRequest):
    """Density and basis admissibility checks plus the realized data amplitude."""
    cfg = req.config
    try:
        density = build_density(cfg)
        constants = hy.validate_density(density, grid=cfg.density.validation_grid)
        from .config import build_problem

        _, basis, _, data = build_problem(cfg)
    except (ConfigurationError, DensityValidationError, GridError) as err:
        raise _bad_request(err) from None
    return ValidateResponse(
        ok=True,
        delta=data.delta,
        density_constants={
            "C_rho": constants.C_rho,
            "C_rho_star": constants.C_rho_star,
            "A_R": constants.A_R,
            "C_R": constants.C_R,
            "K_R": constants.K_R,
            "H_rho": constants.H_rho,
            "R": constants.R,
        },
        eigenvalues={
            "lambda": list(map(float, basis.lam)),
            "mu": list(map(float, basis.mu)),
        },
    )


@app.post("/run", response_model=RunResponse)
def run(req: RunRequest):
    """Solve one scenario and return the report plus CSV artifacts."""
    try:
        result = execute_run(req.config)
    except (ConfigurationError, DensityValidationError, GridError) as err:
        raise _bad_request(err) from None
    return RunResponse(
        status=result["status"],
        report=result["report"],
        norms_csv=result["norms_csv"],
        probes_csv=result["probes_csv"],
    )


@app.post("/sweep", response_model=SweepResponse)
def sweep(req: SweepRequest):
    """Run the scenario over a list of target amplitudes (rows independent)."""
    try:
        result = execute_sweep(req.config, req.values, threads=max(1, req.threads))
    except (ConfigurationError, DensityValidationError, GridError) as err:
        raise _bad_request(err) from None
    return SweepResponse(
        rows=result["rows"],
        csv=result["csv"],
        empirical_delta_star=result["empirical_delta_star"],
    )
