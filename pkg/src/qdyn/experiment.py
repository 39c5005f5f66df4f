"""Multi-trial quantization experiments with mean/std aggregation.

Each trial draws its own calibration batch (without replacement, from a
trial-specific derived seed), calibrates activation ranges, runs the
simulated-quantized path on the eval set against the shared fp32 reference,
and records layerwise and output-level QMSE/QCE/QKL-Div plus accuracies when
labels exist. The fp32 pass does not depend on calibration, so it runs once.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .calibrate import calibrate
from .datasets import Dataset
from .engine import forward_fp32, forward_quant, weighted_capture_names
from .graph import ModelGraph
from .metrics import LayerStats, build_histogram, layer_stats, output_metrics, qce, qkl, qmse
from .quantize import PER_TENSOR, RangeRecord
from .tensor import Tensor

LAYER_METRICS = ("qmse", "qce", "qkl_div")
OUTPUT_FIELDS = ("qmse", "qce", "qkl_div", "fp32_accuracy", "quant_accuracy",
                 "percent_acc_decrease")


@dataclass
class TrialResult:
    trial: int
    ranges: list[RangeRecord]
    layer_metrics: dict[str, dict[str, float]]  # layer name -> metric -> value
    output: dict[str, float]
    fp32_accuracy: float | None = None
    quant_accuracy: float | None = None
    percent_acc_decrease: float | None = None


@dataclass
class QuantReport:
    """Per-trial results plus mean/std aggregates for one model."""

    name: str
    layer_names: list[str]
    trials: list[TrialResult]
    stats: list[LayerStats]
    config: dict = field(default_factory=dict)

    def _series(self, pick) -> np.ndarray:
        return np.array([pick(t) for t in self.trials], dtype=np.float64)

    def output_mean_std(self, metric: str) -> tuple[float, float]:
        values = self._series(lambda t: t.output[metric])
        return float(values.mean()), float(values.std())

    def accuracy_mean_std(self, which: str) -> tuple[float, float] | None:
        if getattr(self.trials[0], which) is None:
            return None
        values = self._series(lambda t: getattr(t, which))
        return float(values.mean()), float(values.std())

    def layer_mean_std(self, metric: str) -> dict[str, tuple[float, float]]:
        out = {}
        for name in self.layer_names:
            values = self._series(lambda t: t.layer_metrics[name][metric])
            out[name] = (float(values.mean()), float(values.std()))
        return out


def accuracy(softmax_out: Tensor, labels: np.ndarray) -> float:
    """Percent top-1 accuracy; argmax ties resolve to the lowest class index."""
    probs = softmax_out.data.reshape(softmax_out.shape[0], -1)
    predicted = probs.argmax(axis=1)
    return float((predicted == labels).mean() * 100.0)


def _trial_seeds(seed: int, n_trials: int) -> list[np.random.Generator]:
    children = np.random.SeedSequence(seed).spawn(n_trials)
    return [np.random.default_rng(c) for c in children]


def run_trials(model: ModelGraph, calib_pool: Dataset, eval_set: Dataset,
               n_trials: int = 5, batch_size: int = 800, percentile: float = 0.05,
               seed: int = 0, weight_mode: str = PER_TENSOR,
               range_scale: float = 1.0, name: str = "model",
               config: dict | None = None) -> QuantReport:
    """Full experiment: n_trials independent calibrations evaluated on one
    eval set. ``range_scale`` artificially inflates every calibrated range,
    the knob used to study degradation under coarser activation grids."""
    if n_trials < 1:
        raise ValueError(f"n_trials must be >= 1, got {n_trials}")
    if len(calib_pool) < batch_size:
        raise ValueError(
            f"calibration pool has {len(calib_pool)} images but batch size is {batch_size}"
        )
    layer_names = weighted_capture_names(model)
    eval_x = eval_set.tensor()
    fp32_out, fp32_trace = forward_fp32(model, eval_x, capture=True)
    fp32_by_name = dict(fp32_trace)
    fp32_acc = None if eval_set.labels is None else accuracy(fp32_out, eval_set.labels)

    trials = []
    for t, rng in enumerate(_trial_seeds(seed, n_trials)):
        picked = rng.choice(len(calib_pool), size=batch_size, replace=False)
        batch = Tensor(calib_pool.images[picked])
        ranges = calibrate(model, [batch], p=percentile)
        if range_scale != 1.0:
            ranges = [r.scaled(range_scale) for r in ranges]
        q_out, q_trace = forward_quant(model, ranges, eval_x,
                                       weight_mode=weight_mode, capture=True)
        q_by_name = dict(q_trace)

        layer_metrics = {}
        for lname in layer_names:
            f_act = fp32_by_name[lname].data
            q_act = q_by_name[lname].data
            p_hist, q_hist = build_histogram(f_act, q_act)
            layer_metrics[lname] = {
                "qmse": qmse(f_act, q_act),
                "qce": qce(p_hist, q_hist),
                "qkl_div": qkl(p_hist, q_hist),
            }
        result = TrialResult(
            trial=t,
            ranges=ranges,
            layer_metrics=layer_metrics,
            output=output_metrics(fp32_out, q_out),
        )
        if eval_set.labels is not None:
            result.fp32_accuracy = fp32_acc
            result.quant_accuracy = accuracy(q_out, eval_set.labels)
            if fp32_acc > 0:
                result.percent_acc_decrease = (
                    100.0 * (fp32_acc - result.quant_accuracy) / fp32_acc
                )
            else:
                result.percent_acc_decrease = 0.0
        trials.append(result)

    return QuantReport(
        name=name,
        layer_names=layer_names,
        trials=trials,
        stats=layer_stats(model, fp32_trace),
        config=dict(config or {}),
    )
