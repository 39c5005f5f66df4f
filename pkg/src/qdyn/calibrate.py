"""Activation-range calibration from sample batches."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .engine import capture_points, forward_fp32
from .graph import ModelGraph
from .quantize import DEGENERATE_WIDTH, RangeRecord, percentile_range
from .tensor import Tensor


def calibrate(model: ModelGraph, batches: Sequence[Tensor],
              p: float = 0.05) -> list[RangeRecord]:
    """Percentile-clipped live ranges for every capture point.

    Runs the fp32 forward pass (BN-folded) over each batch, pools the
    activation values of every capture point across all batches in batch
    order, clips p mass per tail, and widens each range to include zero.
    """
    if not batches:
        raise ValueError("calibrate needs at least one batch")
    names = [pt.name for pt in capture_points(model)]
    pooled: dict[str, list[np.ndarray]] = {name: [] for name in names}
    for batch in batches:
        _, trace = forward_fp32(model, batch, capture=True)
        for name, act in trace:
            if name in pooled:
                pooled[name].append(act.data.reshape(-1))

    records = []
    for name in names:
        samples = np.concatenate(pooled[name]) if len(pooled[name]) > 1 else pooled[name][0]
        lo, hi = percentile_range(samples, p)
        if lo == hi:
            lo, hi = lo - DEGENERATE_WIDTH, hi + DEGENERATE_WIDTH
        records.append(RangeRecord(name, min(lo, 0.0), max(hi, 0.0)))
    return records
