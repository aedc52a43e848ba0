"""FastAPI service wrapping the core library.

Every endpoint is a stateless request/response computation over the same
functions the CLI uses.  Domain validation errors surface as 400s; model
shape errors from pydantic as 422s.

Run with: uvicorn deepselect.service.app:app
"""

from __future__ import annotations

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

import deepselect
from deepselect import divergence as dv
from deepselect.config import config_from_sources
from deepselect.data import SynthSpec, synth_mixture
from deepselect.dpm import DpmHyper, fit_dpm
from deepselect.evaluation import LabeledAssignment, clustering_accuracy, estimated_k_report
from deepselect.gmm import fit_gmm
from deepselect.service import schemas as sm
from deepselect.training import train


def create_app() -> FastAPI:
    app = FastAPI(title="deepselect", version=deepselect.__version__)

    @app.exception_handler(ValueError)
    async def value_error_handler(request: Request, exc: ValueError):
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    @app.get("/health", response_model=sm.HealthResponse)
    def health():
        return sm.HealthResponse(version=deepselect.__version__)

    @app.post("/divergence", response_model=sm.DivergenceResponse)
    def divergence(req: sm.DivergenceRequest):
        mean1 = np.asarray(req.mean1, dtype=float)
        mean2 = np.asarray(req.mean2, dtype=float)
        if req.kind == "ajsd-first-order":
            value = dv.alpha_jsd_first_order(mean1, mean2, req.alpha)
        else:
            g1 = dv.DiagGaussian(mean1, req.variance1 if req.variance1 is not None else np.ones_like(mean1))
            g2 = dv.DiagGaussian(mean2, req.variance2 if req.variance2 is not None else np.ones_like(mean2))
            if req.kind == "kld":
                value = dv.kld_gaussian(g1, g2)
            elif req.kind == "ajsd":
                value = dv.alpha_jsd(g1, g2, req.alpha)
            else:
                raise ValueError(f"unknown divergence kind {req.kind!r}")
        return sm.DivergenceResponse(kind=req.kind, value=value)

    @app.post("/divergence/asymmetry", response_model=sm.AsymmetryResponse)
    def asymmetry(req: sm.AsymmetryRequest):
        if req.grid_step <= 0:
            raise ValueError("grid_step must be positive")
        grid = np.arange(req.grid_lo, req.grid_hi + req.grid_step / 2, req.grid_step)
        rows = dv.asymmetry_table(req.mu1, grid, req.alpha)
        return sm.AsymmetryResponse(
            rows=[sm.AsymmetryRow(mu2=r[0], kld=r[1], ajsd=r[2]) for r in rows]
        )

    @app.post("/synth", response_model=sm.SynthResponse)
    def synth(req: sm.SynthRequest):
        matrix = synth_mixture(SynthSpec(req.k, req.d, req.n_per, req.separation, req.seed))
        return sm.SynthResponse(values=matrix.values.tolist(), labels=matrix.labels.tolist())

    def _fit_response(state, labels):
        khat, sizes = estimated_k_report(state)
        accuracy = None
        if labels is not None:
            accuracy = clustering_accuracy(LabeledAssignment(state.assignments, np.asarray(labels)))
        return sm.FitResponse(
            khat=khat,
            sizes=[int(s) for s in sizes],
            assignments=state.assignments.tolist(),
            accuracy=accuracy,
        )

    @app.post("/fit/dpm", response_model=sm.FitResponse)
    def fit_dpm_endpoint(req: sm.FitDpmRequest):
        values = np.asarray(req.values, dtype=float)
        hyper = DpmHyper(req.hyper.omega0, req.hyper.a0, req.hyper.b0, req.hyper.m0, req.hyper.lambda0)
        state = fit_dpm(
            values, req.truncation, hyper=hyper, max_iters=req.max_iters,
            seed=req.seed, prune_threshold=req.prune_threshold,
        )
        return _fit_response(state, req.labels)

    @app.post("/fit/gmm", response_model=sm.FitResponse)
    def fit_gmm_endpoint(req: sm.FitGmmRequest):
        values = np.asarray(req.values, dtype=float)
        state = fit_gmm(values, req.clusters, max_iters=req.max_iters, seed=req.seed)
        return _fit_response(state, req.labels)

    @app.post("/train", response_model=sm.TrainResponse)
    def train_endpoint(req: sm.TrainRequest):
        values = np.asarray(req.values, dtype=float)
        raw = req.config.model_dump()
        raw["arch"] = tuple(raw["arch"])
        config = config_from_sources({}, raw)
        report = train(values, config)
        accuracy = None
        if req.labels is not None and report.final_state is not None:
            accuracy = clustering_accuracy(
                LabeledAssignment(report.final_state.assignments, np.asarray(req.labels))
            )
        return sm.TrainResponse(
            records=[sm.MetricRecord(phase=p, epoch=e, metric=m, value=v) for p, e, m, v in report.records],
            khat_trajectory=report.khat_trajectory,
            final_khat=report.khat_trajectory[-1] if report.khat_trajectory else None,
            accuracy=accuracy,
        )

    @app.post("/eval/accuracy", response_model=sm.AccuracyResponse)
    def accuracy(req: sm.AccuracyRequest):
        value = clustering_accuracy(LabeledAssignment(np.asarray(req.predicted), np.asarray(req.truth)))
        return sm.AccuracyResponse(accuracy=value)

    return app


app = create_app()
