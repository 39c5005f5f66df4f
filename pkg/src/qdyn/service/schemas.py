"""Request/response models for the analysis service."""

from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, Field

Arch = Literal["toynet_regular", "toynet_dws", "mobilenet_v1_cifar", "resnet34_cifar"]
Init = Literal["glorot_uniform", "he_normal"]
WeightMode = Literal["per_tensor", "per_channel"]


class BuildRequest(BaseModel):
    arch: Arch = "toynet_regular"
    init: Init = "glorot_uniform"
    use_gamma: bool = True
    heterogeneity: float = Field(default=1.0, ge=1.0)
    seed: int = 0


class BuildResponse(BaseModel):
    manifest: dict
    blob_b64: str
    blob_sha256: str
    param_count: int


class AnalyzeRequest(BaseModel):
    arch: Arch = "toynet_regular"
    init: Init = "glorot_uniform"
    use_gamma: bool = True
    heterogeneity: float = Field(default=1.0, ge=1.0)
    trials: int = Field(default=5, ge=1)
    calib_batch: int = Field(default=800, ge=1)
    percentile: float = Field(default=0.05, ge=0.0, lt=0.5)
    weight_mode: WeightMode = "per_tensor"
    seed: int = 0
    data: str | None = None  # server-side CIFAR-10 path; None = synthetic
    eval_size: int = Field(default=256, ge=1)
    pool_size: int = Field(default=2000, ge=1)
    name: str | None = None


class MeanStd(BaseModel):
    mean: float
    std: float


class AnalyzeSummary(BaseModel):
    name: str
    n_trials: int
    output_qmse: MeanStd
    output_qce: MeanStd
    output_qkl_div: MeanStd
    fp32_accuracy: MeanStd | None = None
    quant_accuracy: MeanStd | None = None
    percent_acc_decrease: MeanStd | None = None


class AnalyzeResponse(BaseModel):
    summary: AnalyzeSummary
    files: dict[str, str]  # filename -> content


class GridRequest(AnalyzeRequest):
    jobs: int = Field(default=1, ge=1)


class GridCell(BaseModel):
    name: str
    files: dict[str, str]


class GridResponse(BaseModel):
    combined_report_csv: str
    combined_layerwise_csv: str
    cells: list[GridCell]


class PlotRequest(BaseModel):
    csv: str  # long-form layerwise CSV content
    metric: str
    title: str | None = None


class PlotResponse(BaseModel):
    svg: str


class HealthResponse(BaseModel):
    status: str
    version: str
