"""Pydantic request/response models of the solver service."""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, Field, model_validator


class SolverControls(BaseModel):
    quad_order: int = Field(101, ge=3, le=251)
    damping: float = Field(0.5, ge=0.0, lt=1.0)
    tol: float = Field(1e-10, gt=0.0)
    max_iter: int = Field(100_000, ge=1)


class SolveRequest(SolverControls):
    alpha: float = Field(gt=0.0)
    rho: float = Field(gt=0.0, lt=1.0)
    gamma: float = Field(ge=0.0)
    theta: Optional[float] = Field(None, gt=0.0, lt=1.0)
    sigma_x2: float = Field(1.0, gt=0.0)


class BranchRecordModel(BaseModel):
    gamma: float
    branch: str
    q_d: float
    q_x: float
    m_d: float
    m_x: float
    Q_x: float
    mse_d: float
    mse_x: float
    phi_finite: float
    phi_logdiv: float
    dominant: bool


class SolveResponse(BaseModel):
    region: Literal["I", "II", "III"]
    records: list[BranchRecordModel]


class SweepRequest(SolverControls):
    alpha: float = Field(gt=0.0)
    rho: float = Field(gt=0.0, lt=1.0)
    theta: Optional[float] = Field(None, gt=0.0, lt=1.0)
    sigma_x2: float = Field(1.0, gt=0.0)
    gamma_min: float = Field(ge=0.0)
    gamma_max: float = Field(gt=0.0)
    steps: int = Field(ge=2)

    @model_validator(mode="after")
    def _check_range(self):
        if not self.gamma_min < self.gamma_max:
            raise ValueError("gamma_min must be smaller than gamma_max")
        return self


class SweepResponse(BaseModel):
    records: list[BranchRecordModel]


class FreeEntropyRowModel(BaseModel):
    gamma: float
    branch: str
    phi_finite: float
    phi_logdiv: float


class FreeEntropyResponse(BaseModel):
    rows: list[FreeEntropyRowModel]


class BoundaryRequest(BaseModel):
    which: Literal["gamma-s", "gamma-f", "gamma-m", "rho-m"]
    alpha: float = Field(gt=0.0)
    rho: Optional[float] = Field(None, gt=0.0, lt=1.0)
    rho_range: Optional[str] = None
    tol: float = Field(1e-3, gt=0.0)
    sigma_x2: float = Field(1.0, gt=0.0)
    gamma_cap: float = Field(1e3, gt=0.0)
    quad_order: int = Field(101, ge=3, le=251)

    @model_validator(mode="after")
    def _check_target(self):
        if self.which in ("gamma-s", "gamma-m") and \
                self.rho is None and self.rho_range is None:
            raise ValueError(f"{self.which} requires rho or rho_range")
        return self


class BoundaryRowModel(BaseModel):
    parameter: float
    value: Optional[float] = None  # None encodes diverged/undefined on the wire
    status: str


class BoundaryResponse(BaseModel):
    rows: list[BoundaryRowModel]


class PhaseDiagramRequest(BaseModel):
    alpha_grid: str
    rho_grid: str
    sigma_x2: float = Field(1.0, gt=0.0)
    boundary_tol: float = Field(1e-3, gt=0.0)
    quad_order: int = Field(101, ge=3, le=251)


class PhaseCellModel(BaseModel):
    alpha: float
    rho: float
    region: Literal["I", "II", "III"]


class PhaseDiagramResponse(BaseModel):
    cells: list[PhaseCellModel]
    boundary: list[BoundaryRowModel]


class HealthResponse(BaseModel):
    status: Literal["ok"]
    version: str
