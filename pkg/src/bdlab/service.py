"""HTTP service wrapping the core operations.

Run with: uvicorn bdlab.service:app
"""

from __future__ import annotations

import math

import numpy as np
from fastapi import FastAPI, HTTPException

from . import schemas
from .cli import _builtin_measure
from .errors import InputError, NotSolvableError, ParseError
from .fields import (DisplacementField, Grid, assemble_symmetrized_measure,
                     doubling_scan, staircase_field)
from .functional import area_functional, evaluate_functional
from .integrands import builtin_integrand, cell_problem_min, parse_integrand
from .rigidity2d import classify_inclusion
from .symtensor import classify_dyad
from .youngmeasures import elementary_ym, jensen_check, laminate_ym


def _integrand(spec: str):
    if spec.startswith("@"):
        return builtin_integrand(spec)
    return parse_integrand(spec)


def create_app() -> FastAPI:
    app = FastAPI(title="bdlab",
                  description="Linear-growth variational problems over "
                              "symmetrized gradients")

    @app.exception_handler(InputError)
    async def _input_error(request, exc):
        raise HTTPException(status_code=422, detail=str(exc))

    @app.get("/health")
    def health():
        return {"status": "ok"}

    @app.post("/classify", response_model=schemas.ClassifyResponse)
    def classify(req: schemas.ClassifyRequest):
        try:
            dc = classify_dyad(np.asarray(req.matrix, dtype=float), tol=req.tol)
        except InputError as exc:
            raise HTTPException(422, str(exc))
        doc = dc.to_json()
        return schemas.ClassifyResponse(tag=doc["tag"], a=doc["a"], b=doc["b"],
                                        sign=doc["sign"])

    @app.post("/evaluate", response_model=schemas.BreakdownResponse)
    def evaluate(req: schemas.EvaluateRequest):
        try:
            u = DisplacementField.from_json(req.field.model_dump())
            f = _integrand(req.integrand)
            br = evaluate_functional(f, u, include_boundary=req.include_boundary)
            area = area_functional(assemble_symmetrized_measure(u))
        except (InputError, ParseError) as exc:
            raise HTTPException(422, str(exc))
        return schemas.BreakdownResponse(**br.to_json(), area=area)

    @app.post("/qc-test", response_model=schemas.QcTestResponse)
    def qc_test(req: schemas.QcTestRequest):
        try:
            h = _integrand(req.integrand)
            cell = Grid(((0.0, 1.0), (0.0, 1.0)), (req.grid_n, req.grid_n))
            opts = {"seed": req.seed}
            if req.tol is not None:
                opts["tol"] = req.tol
            res = cell_problem_min(h, np.asarray(req.at, dtype=float), cell, opts)
        except (InputError, ParseError) as exc:
            raise HTTPException(422, str(exc))
        return schemas.QcTestResponse(
            min_mean=res.min_mean, h_at_A=res.h_at_A, violation=res.violation,
            verdict="violation" if res.violation else "no-violation")

    @app.post("/rigidity/classify", response_model=schemas.RigidityClassifyResponse)
    def rigidity_classify(req: schemas.RigidityClassifyRequest):
        try:
            case = classify_inclusion(np.asarray(req.matrix, dtype=float))
        except InputError as exc:
            raise HTTPException(422, str(exc))
        return schemas.RigidityClassifyResponse(
            tag=case.tag, eigen=case.eigen, frame=case.frame.tolist())

    @app.post("/jensen", response_model=schemas.JensenResponse)
    def jensen(req: schemas.JensenRequest):
        try:
            h = _integrand(req.integrand)
            if req.ym == "laminate":
                P = np.array([[0.0, 0.5], [0.5, 0.0]])
                nu = laminate_ym(P, -P, req.theta)
            elif req.ym == "staircase":
                nu = elementary_ym(assemble_symmetrized_measure(staircase_field()))
            else:
                raise InputError(f"unknown Young measure '{req.ym}'")
            rep = jensen_check(nu, h, where=req.where, tol=req.tol)
        except (InputError, ParseError) as exc:
            raise HTTPException(422, str(exc))
        return schemas.JensenResponse(**rep)

    @app.post("/doubling", response_model=schemas.DoublingResponse)
    def doubling(req: schemas.DoublingRequest):
        try:
            mu = _builtin_measure(req.measure)
            rep = doubling_scan(mu, np.asarray(req.x0, dtype=float),
                                req.t, req.radii)
        except InputError as exc:
            raise HTTPException(422, str(exc))
        sup = rep["sup"] if math.isfinite(rep["sup"]) else float("inf")
        return schemas.DoublingResponse(ratios=rep["ratios"], sup=sup,
                                        argmax=rep["argmax"])

    return app


app = create_app()
