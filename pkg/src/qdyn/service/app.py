"""FastAPI service exposing model building, quantization analysis, the
ablation grid, and chart rendering over the core package.

File-producing endpoints return file contents in the response body (blob as
base64), so clients own all filesystem writes; a `data` path in a request
refers to the server's filesystem.
"""

from __future__ import annotations

import base64

from fastapi import FastAPI, HTTPException

from .. import __version__
from ..config import ExperimentConfig, cell_name
from ..model_io import model_blob, model_manifest
from ..pipeline import GRID_CELLS, build_model, report_files, run_experiment, run_grid
from ..plotting import layerwise_chart
from .schemas import (
    AnalyzeRequest,
    AnalyzeResponse,
    AnalyzeSummary,
    BuildRequest,
    BuildResponse,
    GridCell,
    GridRequest,
    GridResponse,
    HealthResponse,
    MeanStd,
    PlotRequest,
    PlotResponse,
)


def _config_from(req: AnalyzeRequest) -> ExperimentConfig:
    return ExperimentConfig(
        arch=req.arch,
        init=req.init,
        use_gamma=req.use_gamma,
        heterogeneity=req.heterogeneity,
        trials=req.trials,
        calib_batch=req.calib_batch,
        percentile=req.percentile,
        weight_mode=req.weight_mode,
        seed=req.seed,
        data=req.data,
        eval_size=req.eval_size,
        pool_size=req.pool_size,
    ).validate()


def _summary(report) -> AnalyzeSummary:
    def ms(pair):
        return None if pair is None else MeanStd(mean=pair[0], std=pair[1])

    return AnalyzeSummary(
        name=report.name,
        n_trials=len(report.trials),
        output_qmse=ms(report.output_mean_std("qmse")),
        output_qce=ms(report.output_mean_std("qce")),
        output_qkl_div=ms(report.output_mean_std("qkl_div")),
        fp32_accuracy=ms(report.accuracy_mean_std("fp32_accuracy")),
        quant_accuracy=ms(report.accuracy_mean_std("quant_accuracy")),
        percent_acc_decrease=ms(report.accuracy_mean_std("percent_acc_decrease")),
    )


def create_app() -> FastAPI:
    app = FastAPI(title="qdyn analysis service", version=__version__)

    @app.get("/health", response_model=HealthResponse)
    def health():
        return HealthResponse(status="ok", version=__version__)

    @app.post("/build", response_model=BuildResponse)
    def build(req: BuildRequest):
        config = ExperimentConfig(arch=req.arch, init=req.init, use_gamma=req.use_gamma,
                                  heterogeneity=req.heterogeneity, seed=req.seed).validate()
        model = build_model(config)
        blob = model_blob(model)
        manifest = model_manifest(model, blob)
        return BuildResponse(
            manifest=manifest,
            blob_b64=base64.b64encode(blob).decode("ascii"),
            blob_sha256=manifest["blob_sha256"],
            param_count=model.param_count(),
        )

    @app.post("/analyze", response_model=AnalyzeResponse)
    def analyze(req: AnalyzeRequest):
        config = _config_from(req)
        try:
            report = run_experiment(config, name=req.name)
        except (ValueError, OSError) as e:
            raise HTTPException(status_code=400, detail=str(e))
        return AnalyzeResponse(summary=_summary(report), files=report_files(report))

    @app.post("/grid", response_model=GridResponse)
    def grid(req: GridRequest):
        config = _config_from(req)
        try:
            reports, combined, layerwise = run_grid(config, jobs=req.jobs)
        except (ValueError, OSError) as e:
            raise HTTPException(status_code=400, detail=str(e))
        cells = [
            GridCell(name=cell_name(config.arch, gamma, init), files=report_files(r))
            for (init, gamma), r in zip(GRID_CELLS, reports)
        ]
        return GridResponse(combined_report_csv=combined,
                            combined_layerwise_csv=layerwise, cells=cells)

    @app.post("/plot", response_model=PlotResponse)
    def plot(req: PlotRequest):
        try:
            svg = layerwise_chart(req.csv, req.metric, title=req.title)
        except ValueError as e:
            raise HTTPException(status_code=400, detail=str(e))
        return PlotResponse(svg=svg)

    return app


app = create_app()
