"""Report serialization: summary CSV, long-form layerwise CSVs, and JSON.

All emitters are deterministic: fixed field order, fixed float formatting,
LF newlines. The summary CSV uses the canonical header below with one
"mean ± std" cell per metric.
"""

from __future__ import annotations

import json
from typing import Iterable

from .experiment import LAYER_METRICS, QuantReport

TABLE_HEADER = [
    "Network Architecture",
    "FP32 Acc (%)",
    "QUINT8 Acc (%)",
    "QMSE",
    "QCE",
    "QKL-Div",
    "Percent Acc Decrease",
]

LAYERWISE_HEADER = ["layer_index", "layer_name", "metric", "trial", "value"]
RANGES_HEADER = ["trial", "layer_index", "layer_name", "source", "min", "max"]
STATS_HEADER = ["layer_index", "layer_name", "kind", "range", "average_precision",
                "num_channels"]


def _num(v: float) -> str:
    return f"{v:.9g}"


def _cell(mean_std: tuple[float, float] | None) -> str:
    if mean_std is None:
        return "n/a"
    mean, std = mean_std
    return f"{mean:.6g} ± {std:.6g}"


def summary_rows(reports: Iterable[QuantReport]) -> list[list[str]]:
    rows = []
    for r in reports:
        rows.append([
            r.name,
            _cell(r.accuracy_mean_std("fp32_accuracy")),
            _cell(r.accuracy_mean_std("quant_accuracy")),
            _cell(r.output_mean_std("qmse")),
            _cell(r.output_mean_std("qce")),
            _cell(r.output_mean_std("qkl_div")),
            _cell(r.accuracy_mean_std("percent_acc_decrease")),
        ])
    return rows


def _csv(header: list[str], rows: Iterable[Iterable[str]]) -> str:
    lines = [",".join(header)]
    lines.extend(",".join(row) for row in rows)
    return "\n".join(lines) + "\n"


def summary_csv(reports: Iterable[QuantReport]) -> str:
    return _csv(TABLE_HEADER, summary_rows(reports))


def layerwise_csv(report: QuantReport, series: str | None = None) -> str:
    """Long-form layerwise metrics; with ``series`` set, a leading series
    column tags every row (used when combining several models in one file)."""
    header = (["series"] if series is not None else []) + LAYERWISE_HEADER
    rows = []
    for idx, name in enumerate(report.layer_names, start=1):
        for metric in LAYER_METRICS:
            for trial in report.trials:
                row = [str(idx), name, metric, str(trial.trial),
                       _num(trial.layer_metrics[name][metric])]
                if series is not None:
                    row = [series] + row
                rows.append(row)
    return _csv(header, rows)


def combined_layerwise_csv(named_reports: list[tuple[str, QuantReport]]) -> str:
    header = ["series"] + LAYERWISE_HEADER
    body = []
    for series, report in named_reports:
        chunk = layerwise_csv(report, series=series)
        body.extend(chunk.splitlines()[1:])
    return "\n".join([",".join(header)] + body) + "\n"


def ranges_csv(report: QuantReport) -> str:
    """Calibrated RangeRecords of every capture point, per trial."""
    rows = []
    for trial in report.trials:
        for idx, rec in enumerate(trial.ranges, start=1):
            rows.append([str(trial.trial), str(idx), rec.layer, rec.source,
                         _num(rec.min), _num(rec.max)])
    return _csv(RANGES_HEADER, rows)


def layer_stats_csv(report: QuantReport) -> str:
    rows = []
    index = {name: i + 1 for i, name in enumerate(report.layer_names)}
    for s in report.stats:
        rows.append([str(index[s.layer]), s.layer, s.kind, _num(s.range),
                     _num(s.average_precision), str(s.num_channels)])
    return _csv(STATS_HEADER, rows)


def report_json(report: QuantReport) -> str:
    """Full report: config echo, per-trial values, and aggregates."""
    doc = {
        "name": report.name,
        "config": report.config,
        "layer_names": report.layer_names,
        "n_trials": len(report.trials),
        "aggregate": {
            "output": {
                metric: dict(zip(("mean", "std"), report.output_mean_std(metric)))
                for metric in ("qmse", "qce", "qkl_div")
            },
            "accuracy": {
                which: (None if report.accuracy_mean_std(which) is None
                        else dict(zip(("mean", "std"), report.accuracy_mean_std(which))))
                for which in ("fp32_accuracy", "quant_accuracy", "percent_acc_decrease")
            },
            "layerwise": {
                metric: {
                    name: dict(zip(("mean", "std"), ms))
                    for name, ms in report.layer_mean_std(metric).items()
                }
                for metric in LAYER_METRICS
            },
        },
        "trials": [
            {
                "trial": t.trial,
                "output": t.output,
                "fp32_accuracy": t.fp32_accuracy,
                "quant_accuracy": t.quant_accuracy,
                "percent_acc_decrease": t.percent_acc_decrease,
                "layer_metrics": t.layer_metrics,
            }
            for t in report.trials
        ],
        "layer_stats": [
            {
                "layer": s.layer,
                "kind": s.kind,
                "range": s.range,
                "average_precision": s.average_precision,
                "num_channels": s.num_channels,
            }
            for s in report.stats
        ],
    }
    return json.dumps(doc, indent=2) + "\n"
