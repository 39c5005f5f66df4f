"""Command-line front end.

The CLI is a thin client of the analysis service: it resolves configuration
(flag > config file > QDYN_SEED > default), sends one request, and writes the
returned artifacts to disk. By default the service runs in-process over an
ASGI transport, so no server is needed; --server points at a remote instance
instead. Every command exits 0 on success and nonzero with a single-line
``error: ...`` message on failure.
"""

from __future__ import annotations

import argparse
import asyncio
import base64
import json
import os
import sys

import httpx

from . import __version__
from .config import resolve_config

BUILD_KEYS = ("arch", "init", "use_gamma", "heterogeneity", "seed")
ANALYZE_KEYS = BUILD_KEYS + ("trials", "calib_batch", "percentile", "weight_mode",
                             "seed", "data", "eval_size", "pool_size")


class CliError(Exception):
    pass


class ServiceClient:
    """POSTs to a remote server when given one, else to the in-process app."""

    def __init__(self, server: str | None = None):
        self.server = server.rstrip("/") if server else None

    def post(self, path: str, payload: dict) -> dict:
        if self.server is not None:
            with httpx.Client(base_url=self.server, timeout=None) as client:
                response = client.post(path, json=payload)
        else:
            response = asyncio.run(self._post_inprocess(path, payload))
        if response.status_code != 200:
            try:
                detail = response.json().get("detail", response.text)
            except ValueError:
                detail = response.text
            raise CliError(f"{path} failed ({response.status_code}): {detail}")
        return response.json()

    @staticmethod
    async def _post_inprocess(path: str, payload: dict) -> httpx.Response:
        from .service.app import app

        transport = httpx.ASGITransport(app=app)
        async with httpx.AsyncClient(transport=transport, base_url="http://qdyn",
                                     timeout=None) as client:
            return await client.post(path, json=payload)


def _write(path: str, content: str | bytes):
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    data = content.encode("utf-8") if isinstance(content, str) else content
    with open(path, "wb") as f:
        f.write(data)


def _payload(args, keys) -> dict:
    overrides = {k: getattr(args, k, None) for k in
                 ("arch", "init", "use_gamma", "heterogeneity", "trials", "calib_batch",
                  "percentile", "weight_mode", "seed", "data", "eval_size", "pool_size")}
    config = resolve_config(args.config, overrides)
    doc = config.to_dict()
    return {k: doc[k] for k in keys}


def cmd_build(args) -> int:
    payload = _payload(args, BUILD_KEYS)
    result = ServiceClient(args.server).post("/build", payload)
    manifest_path = os.path.join(args.out_dir, f"{payload['arch']}.json")
    blob_path = os.path.join(args.out_dir, f"{payload['arch']}.bin")
    _write(manifest_path, json.dumps(result["manifest"], indent=2) + "\n")
    _write(blob_path, base64.b64decode(result["blob_b64"]))
    print(f"built {payload['arch']}: {manifest_path} {blob_path} "
          f"params={result['param_count']} sha256={result['blob_sha256']}")
    return 0


def cmd_analyze(args) -> int:
    payload = _payload(args, ANALYZE_KEYS)
    payload["name"] = args.name
    result = ServiceClient(args.server).post("/analyze", payload)
    for filename, content in result["files"].items():
        _write(os.path.join(args.out_dir, filename), content)
    summary = result["summary"]
    print(f"analyzed {summary['name']}: {summary['n_trials']} trials, "
          f"output qmse {summary['output_qmse']['mean']:.6g} "
          f"± {summary['output_qmse']['std']:.6g}, files in {args.out_dir}")
    return 0


def cmd_grid(args) -> int:
    payload = _payload(args, ANALYZE_KEYS)
    payload["jobs"] = args.jobs
    result = ServiceClient(args.server).post("/grid", payload)
    _write(os.path.join(args.out_dir, "grid_report.csv"), result["combined_report_csv"])
    _write(os.path.join(args.out_dir, "grid_layerwise.csv"),
           result["combined_layerwise_csv"])
    for cell in result["cells"]:
        for filename, content in cell["files"].items():
            _write(os.path.join(args.out_dir, cell["name"], filename), content)
    print(f"grid complete: {len(result['cells'])} cells, "
          f"combined report {os.path.join(args.out_dir, 'grid_report.csv')}")
    return 0


def cmd_plot(args) -> int:
    try:
        with open(args.layerwise_csv, "r", encoding="utf-8") as f:
            csv_text = f.read()
    except OSError as e:
        raise CliError(str(e))
    result = ServiceClient(args.server).post(
        "/plot", {"csv": csv_text, "metric": args.metric, "title": args.title}
    )
    out = args.out
    if out is None:
        stem, _ = os.path.splitext(args.layerwise_csv)
        out = f"{stem}.{args.metric}.svg"
    _write(out, result["svg"])
    print(f"plotted {args.metric}: {out}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service.app import app

    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def _add_experiment_flags(p: argparse.ArgumentParser, analysis: bool = True):
    p.add_argument("--config", help="JSON config file; flags override its values")
    p.add_argument("--arch", choices=["toynet_regular", "toynet_dws",
                                      "mobilenet_v1_cifar", "resnet34_cifar"])
    p.add_argument("--init", choices=["glorot_uniform", "he_normal"])
    p.add_argument("--gamma", dest="use_gamma", action=argparse.BooleanOptionalAction,
                   help="batch norm with/without the scaling parameter")
    p.add_argument("--heterogeneity", type=float,
                   help="depthwise channel-range spread factor (>= 1)")
    p.add_argument("--seed", type=int, help="experiment seed (QDYN_SEED is the fallback)")
    if analysis:
        p.add_argument("--trials", type=int, help="quantization trials (default 5)")
        p.add_argument("--calib-batch", dest="calib_batch", type=int,
                       help="calibration batch size (default 800)")
        p.add_argument("--percentile", type=float,
                       help="clipped mass per tail for activation ranges (default 0.05)")
        p.add_argument("--weight-mode", dest="weight_mode",
                       choices=["per_tensor", "per_channel"])
        p.add_argument("--data", help="CIFAR-10 .bin file or directory (default: synthetic)")
        p.add_argument("--eval-size", dest="eval_size", type=int,
                       help="evaluation set size (default 256)")
        p.add_argument("--pool-size", dest="pool_size", type=int,
                       help="synthetic calibration pool size (default 2000)")
    p.add_argument("--out-dir", dest="out_dir", default=".", help="output directory")
    p.add_argument("--server", help="remote service URL (default: run in-process)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qdyn",
        description="Simulated 8-bit post-training quantization and layerwise "
                    "distributional profiling for small CNNs.",
    )
    parser.add_argument("--version", action="version", version=f"qdyn {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build", help="build a model and write its manifest + weight blob")
    _add_experiment_flags(p, analysis=False)
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("analyze", help="run calibration trials and write the reports")
    _add_experiment_flags(p)
    p.add_argument("--name", help="report row name (default: derived from the config)")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("grid", help="run the 2x2 init x gamma ablation for one architecture")
    _add_experiment_flags(p)
    p.add_argument("--jobs", type=int, default=1, help="parallel grid cells (default 1)")
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("plot", help="render a layerwise metric chart from a long-form CSV")
    p.add_argument("layerwise_csv", help="long-form layerwise metrics CSV")
    p.add_argument("--metric", required=True, help="metric column to plot (e.g. qmse)")
    p.add_argument("--title", help="chart title")
    p.add_argument("--out", help="output SVG path (default: <csv>.<metric>.svg)")
    p.add_argument("--server", help="remote service URL (default: run in-process)")
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("serve", help="run the analysis service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
