"""FastAPI service wrapping the solver pipeline.

Every endpoint is a pure computation on the request body; the service
holds no mutable state beyond a small cache of quadrature rules, so any
number of workers or concurrent requests give identical results.
"""

from __future__ import annotations

import math
from functools import lru_cache

from fastapi import FastAPI, HTTPException

from .. import __version__, pipeline
from ..boundaries import phase_region
from ..channel import QuadratureSpec
from ..exceptions import ConvergenceError, DlphaseError, UndefinedBoundary
from ..solver import ModelParams
from .schemas import (BoundaryRequest, BoundaryResponse, BoundaryRowModel,
                      BranchRecordModel, FreeEntropyResponse,
                      FreeEntropyRowModel, HealthResponse,
                      PhaseCellModel, PhaseDiagramRequest,
                      PhaseDiagramResponse, SolveRequest, SolveResponse,
                      SweepRequest, SweepResponse)


@lru_cache(maxsize=8)
def _quad(order: int) -> QuadratureSpec:
    return QuadratureSpec.gauss_hermite(order)


def _wire_value(value: float):
    return None if (math.isinf(value) or math.isnan(value)) else value


def create_app() -> FastAPI:
    app = FastAPI(title="dlphase", version=__version__,
                  description="State-evolution solver for Bayes-optimal "
                              "sparse dictionary learning")

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(status="ok", version=__version__)

    @app.post("/solve", response_model=SolveResponse)
    def solve(req: SolveRequest) -> SolveResponse:
        quad = _quad(req.quad_order)
        theta = req.rho if req.theta is None else req.theta
        try:
            p = ModelParams(alpha=req.alpha, gamma=req.gamma, rho=req.rho,
                            theta=theta, sigma_x2=req.sigma_x2)
            records = pipeline.solve_records(
                p, quad, damping=req.damping, tol=req.tol,
                max_iter=req.max_iter)
            region = phase_region(req.alpha, req.rho, quad, req.sigma_x2)
        except ConvergenceError as err:
            raise HTTPException(status_code=409, detail=str(err)) from err
        except (ValueError, DlphaseError) as err:
            raise HTTPException(status_code=400, detail=str(err)) from err
        return SolveResponse(
            region=region,
            records=[BranchRecordModel(**rec.__dict__) for rec in records])

    @app.post("/sweep", response_model=SweepResponse)
    def sweep(req: SweepRequest) -> SweepResponse:
        quad = _quad(req.quad_order)
        theta = req.rho if req.theta is None else req.theta
        try:
            records = pipeline.sweep_records(
                req.alpha, req.rho, theta, req.sigma_x2,
                req.gamma_min, req.gamma_max, req.steps, quad,
                damping=req.damping, tol=req.tol, max_iter=req.max_iter)
        except ConvergenceError as err:
            raise HTTPException(status_code=409, detail=str(err)) from err
        except (ValueError, DlphaseError) as err:
            raise HTTPException(status_code=400, detail=str(err)) from err
        return SweepResponse(
            records=[BranchRecordModel(**rec.__dict__) for rec in records])

    @app.post("/free-entropy", response_model=FreeEntropyResponse)
    def free_entropy(req: SweepRequest) -> FreeEntropyResponse:
        quad = _quad(req.quad_order)
        theta = req.rho if req.theta is None else req.theta
        try:
            rows = pipeline.free_entropy_rows(
                req.alpha, req.rho, theta, req.sigma_x2,
                req.gamma_min, req.gamma_max, req.steps, quad,
                damping=req.damping, tol=req.tol, max_iter=req.max_iter)
        except ConvergenceError as err:
            raise HTTPException(status_code=409, detail=str(err)) from err
        except (ValueError, DlphaseError) as err:
            raise HTTPException(status_code=400, detail=str(err)) from err
        return FreeEntropyResponse(
            rows=[FreeEntropyRowModel(**row.__dict__) for row in rows])

    @app.post("/boundary", response_model=BoundaryResponse)
    def boundary(req: BoundaryRequest) -> BoundaryResponse:
        quad = _quad(req.quad_order)
        try:
            rho_values = (pipeline.parse_range(req.rho_range)
                          if req.rho_range else None)
            rows = pipeline.boundary_rows(
                req.which, req.alpha, req.rho, rho_values, req.tol, quad,
                sigma_x2=req.sigma_x2, gamma_cap=req.gamma_cap)
        except (ValueError, UndefinedBoundary) as err:
            raise HTTPException(status_code=400, detail=str(err)) from err
        return BoundaryResponse(rows=[
            BoundaryRowModel(parameter=r.parameter,
                             value=_wire_value(r.value), status=r.status)
            for r in rows])

    @app.post("/phase-diagram", response_model=PhaseDiagramResponse)
    def phase_diagram(req: PhaseDiagramRequest) -> PhaseDiagramResponse:
        quad = _quad(req.quad_order)
        try:
            alphas = pipeline.parse_range(req.alpha_grid)
            rhos = pipeline.parse_range(req.rho_grid)
            cells, polyline = pipeline.phase_diagram(
                alphas, rhos, quad, sigma_x2=req.sigma_x2,
                boundary_tol=req.boundary_tol)
        except (ValueError, UndefinedBoundary) as err:
            raise HTTPException(status_code=400, detail=str(err)) from err
        return PhaseDiagramResponse(
            cells=[PhaseCellModel(**c.__dict__) for c in cells],
            boundary=[BoundaryRowModel(parameter=r.parameter,
                                       value=_wire_value(r.value),
                                       status=r.status)
                      for r in polyline])

    return app


app = create_app()
