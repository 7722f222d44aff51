"""Pydantic request/response models for the HTTP service."""

from __future__ import annotations

from typing import List, Optional, Tuple

from pydantic import BaseModel, Field

Matrix = List[List[float]]


class ClassifyRequest(BaseModel):
    matrix: Matrix
    tol: float = 1e-9


class ClassifyResponse(BaseModel):
    tag: str
    a: Optional[List[float]] = None
    b: Optional[List[float]] = None
    sign: Optional[int] = None


class JumpDoc(BaseModel):
    polyline: List[List[float]]
    jump: List[float]


class GridDoc(BaseModel):
    box: List[List[float]]
    n: List[int]


class FieldDoc(BaseModel):
    grid: GridDoc
    values: List[float]
    jumps: List[JumpDoc] = Field(default_factory=list)


class EvaluateRequest(BaseModel):
    field: FieldDoc
    integrand: str
    include_boundary: bool = True


class BreakdownResponse(BaseModel):
    bulk: float
    singular: float
    boundary: float
    total: float
    boundary_included: bool
    area: float


class QcTestRequest(BaseModel):
    integrand: str
    at: Matrix
    grid_n: int = 33
    seed: int = 0
    tol: Optional[float] = None


class QcTestResponse(BaseModel):
    min_mean: float
    h_at_A: float
    violation: bool
    verdict: str


class RigidityClassifyRequest(BaseModel):
    matrix: Matrix


class RigidityClassifyResponse(BaseModel):
    tag: str
    eigen: Tuple[float, float]
    frame: Matrix


class JensenRequest(BaseModel):
    integrand: str
    ym: str = "laminate"  # laminate | staircase
    theta: float = 0.5
    where: str = "regular"
    tol: float = 1e-9


class JensenResponse(BaseModel):
    where: str
    lhs: float
    rhs: float
    gap: float
    verdict: str


class DoublingRequest(BaseModel):
    measure: str = "lebesgue"  # builtin name
    x0: List[float] = Field(default_factory=lambda: [0.0, 0.0])
    t: float = 3.0
    radii: List[float] = Field(default_factory=lambda: [0.2, 0.1, 0.05])


class DoublingResponse(BaseModel):
    ratios: List[Tuple[float, float]]
    sup: float
    argmax: Optional[float]
