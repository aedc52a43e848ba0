"""Pydantic request/response models for the HTTP service."""

from __future__ import annotations

from pydantic import BaseModel, Field


class HealthResponse(BaseModel):
    status: str = "ok"
    version: str


class DivergenceRequest(BaseModel):
    kind: str = Field(description="kld | ajsd | ajsd-first-order")
    mean1: list[float]
    mean2: list[float]
    variance1: list[float] | None = None
    variance2: list[float] | None = None
    alpha: float = 0.65


class DivergenceResponse(BaseModel):
    kind: str
    value: float


class AsymmetryRequest(BaseModel):
    mu1: float
    alpha: float = 0.65
    grid_lo: float = -2.0
    grid_hi: float = 2.0
    grid_step: float = 0.1


class AsymmetryRow(BaseModel):
    mu2: float
    kld: float
    ajsd: float


class AsymmetryResponse(BaseModel):
    rows: list[AsymmetryRow]


class SynthRequest(BaseModel):
    k: int
    d: int
    n_per: int
    separation: float
    seed: int


class SynthResponse(BaseModel):
    values: list[list[float]]
    labels: list[int]


class HyperParams(BaseModel):
    omega0: float = 2000.0
    a0: float = 1.25
    b0: float = 0.25
    m0: float = 1.0
    lambda0: float = 0.5


class FitDpmRequest(BaseModel):
    values: list[list[float]]
    truncation: int
    seed: int
    labels: list[int] | None = None
    max_iters: int = 300
    prune_threshold: float = 0.05
    hyper: HyperParams = Field(default_factory=HyperParams)


class FitGmmRequest(BaseModel):
    values: list[list[float]]
    clusters: int
    seed: int
    labels: list[int] | None = None
    max_iters: int = 100


class FitResponse(BaseModel):
    khat: int
    sizes: list[int]
    assignments: list[int]
    accuracy: float | None = None


class TrainConfigModel(BaseModel):
    loss: str = "ajsd"
    alpha: float = 0.65
    lambda3: float = 1.0
    learning_rate: float = 0.01
    mse_epochs: int = 50
    reg_epochs: int = 30
    cycles: int = 3
    truncation: int = 50
    clusters: int = 10
    omega0: float = 2000.0
    a0: float = 1.25
    b0: float = 0.25
    m0: float = 1.0
    m0_mode: str = "fixed"
    lambda0: float = 0.5
    seed: int
    arch: list[int]
    sigma_head: bool = False
    prune_threshold: float = 0.05
    batch_size: int = 64
    fit_iters: int = 300


class TrainRequest(BaseModel):
    values: list[list[float]]
    labels: list[int] | None = None
    config: TrainConfigModel


class MetricRecord(BaseModel):
    phase: str
    epoch: int
    metric: str
    value: float


class TrainResponse(BaseModel):
    records: list[MetricRecord]
    khat_trajectory: list[int]
    final_khat: int | None = None
    accuracy: float | None = None


class AccuracyRequest(BaseModel):
    predicted: list[int]
    truth: list[int]


class AccuracyResponse(BaseModel):
    accuracy: float
