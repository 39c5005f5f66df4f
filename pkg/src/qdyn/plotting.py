"""Self-contained SVG line charts for layerwise metric series.

Input is the long-form layerwise CSV (layer_index, layer_name, metric,
trial, value), optionally with a leading ``series`` column when several
models share a file. The chart draws one mean polyline per series over the
layer index with a +/- one standard deviation shaded band, the style used
for all layerwise plots. Output bytes are deterministic for a fixed input:
fixed-precision coordinates, no timestamps, no randomness.
"""

from __future__ import annotations

import csv
import io

WIDTH, HEIGHT = 720, 440
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 64, 24, 28, 48

PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"]


def parse_layerwise_csv(text: str) -> tuple[list[str], dict]:
    """-> (metrics present, {series: {metric: {layer_index: [values...]}}})."""
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None:
        raise ValueError("empty layerwise CSV")
    has_series = header[0] == "series"
    expected = (["series"] if has_series else []) + [
        "layer_index", "layer_name", "metric", "trial", "value"]
    if header != expected:
        raise ValueError(f"unexpected layerwise CSV header: {header}")
    data: dict = {}
    metrics: list[str] = []
    for row in reader:
        if not row:
            continue
        if has_series:
            series, idx, _, metric, _, value = row
        else:
            idx, _, metric, _, value = row
            series = ""
        if metric not in metrics:
            metrics.append(metric)
        data.setdefault(series, {}).setdefault(metric, {}).setdefault(
            int(idx), []).append(float(value))
    return metrics, data


def _mean_std(values: list[float]) -> tuple[float, float]:
    n = len(values)
    mean = sum(values) / n
    var = sum((v - mean) ** 2 for v in values) / n
    return mean, var ** 0.5


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi == lo:
        return [lo]
    step = (hi - lo) / (n - 1)
    return [lo + i * step for i in range(n)]


def layerwise_chart(csv_text: str, metric: str, title: str | None = None) -> str:
    """SVG chart of one metric: mean line and +/- std band per series."""
    metrics, data = parse_layerwise_csv(csv_text)
    if metric not in metrics:
        raise ValueError(f"unknown metric {metric!r}; CSV contains {metrics}")

    series_names = sorted(data.keys())
    curves = {}
    for s in series_names:
        per_layer = data[s].get(metric, {})
        if not per_layer:
            continue
        xs = sorted(per_layer)
        stats = [_mean_std(per_layer[x]) for x in xs]
        curves[s] = (xs, stats)
    if not curves:
        raise ValueError(f"no rows for metric {metric!r}")

    all_x = [x for xs, _ in curves.values() for x in xs]
    lo_y = min(m - s for _, stats in curves.values() for m, s in stats)
    hi_y = max(m + s for _, stats in curves.values() for m, s in stats)
    if hi_y == lo_y:
        lo_y, hi_y = lo_y - 0.5, hi_y + 0.5
    pad = 0.05 * (hi_y - lo_y)
    lo_y, hi_y = lo_y - pad, hi_y + pad
    lo_x, hi_x = min(all_x), max(all_x)
    if lo_x == hi_x:
        lo_x, hi_x = lo_x - 1, hi_x + 1

    plot_w = WIDTH - MARGIN_L - MARGIN_R
    plot_h = HEIGHT - MARGIN_T - MARGIN_B

    def px(x: float) -> float:
        return MARGIN_L + (x - lo_x) / (hi_x - lo_x) * plot_w

    def py(y: float) -> float:
        return MARGIN_T + (hi_y - y) / (hi_y - lo_y) * plot_h

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
    ]
    if title:
        out.append(
            f'<text x="{WIDTH / 2:.0f}" y="18" text-anchor="middle" '
            f'font-family="sans-serif" font-size="14">{title}</text>'
        )
    # axes
    out.append(
        f'<line x1="{MARGIN_L}" y1="{MARGIN_T}" x2="{MARGIN_L}" '
        f'y2="{HEIGHT - MARGIN_B}" stroke="black"/>'
    )
    out.append(
        f'<line x1="{MARGIN_L}" y1="{HEIGHT - MARGIN_B}" x2="{WIDTH - MARGIN_R}" '
        f'y2="{HEIGHT - MARGIN_B}" stroke="black"/>'
    )
    for t in _ticks(lo_y, hi_y):
        y = py(t)
        out.append(
            f'<line x1="{MARGIN_L - 4}" y1="{_fmt(y)}" x2="{MARGIN_L}" '
            f'y2="{_fmt(y)}" stroke="black"/>'
        )
        out.append(
            f'<text x="{MARGIN_L - 8}" y="{_fmt(y + 4)}" text-anchor="end" '
            f'font-family="sans-serif" font-size="11">{t:.4g}</text>'
        )
    x_tick_count = min(len(set(all_x)), 12)
    for t in _ticks(lo_x, hi_x, max(x_tick_count, 2)):
        x = px(t)
        out.append(
            f'<line x1="{_fmt(x)}" y1="{HEIGHT - MARGIN_B}" x2="{_fmt(x)}" '
            f'y2="{HEIGHT - MARGIN_B + 4}" stroke="black"/>'
        )
        out.append(
            f'<text x="{_fmt(x)}" y="{HEIGHT - MARGIN_B + 18}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="11">{t:.4g}</text>'
        )
    out.append(
        f'<text x="{MARGIN_L + plot_w / 2:.0f}" y="{HEIGHT - 10}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="12">layer index</text>'
    )
    out.append(
        f'<text x="16" y="{MARGIN_T + plot_h / 2:.0f}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="12" '
        f'transform="rotate(-90 16 {MARGIN_T + plot_h / 2:.0f})">{metric}</text>'
    )

    for i, s in enumerate(sorted(curves)):
        xs, stats = curves[s]
        color = PALETTE[i % len(PALETTE)]
        upper = [(px(x), py(m + sd)) for x, (m, sd) in zip(xs, stats)]
        lower = [(px(x), py(m - sd)) for x, (m, sd) in zip(xs, stats)]
        band = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in upper + lower[::-1])
        out.append(f'<polygon points="{band}" fill="{color}" fill-opacity="0.2" stroke="none"/>')
        line = " ".join(f"{_fmt(px(x))},{_fmt(py(m))}" for x, (m, _) in zip(xs, stats))
        out.append(
            f'<polyline points="{line}" fill="none" stroke="{color}" stroke-width="1.5"/>'
        )

    # legend (only when series are named)
    named = [s for s in sorted(curves) if s]
    for i, s in enumerate(named):
        color = PALETTE[sorted(curves).index(s) % len(PALETTE)]
        y = MARGIN_T + 14 + 16 * i
        out.append(
            f'<rect x="{WIDTH - MARGIN_R - 150}" y="{y - 9}" width="18" height="4" '
            f'fill="{color}"/>'
        )
        out.append(
            f'<text x="{WIDTH - MARGIN_R - 126}" y="{y - 3}" font-family="sans-serif" '
            f'font-size="11">{s}</text>'
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"
