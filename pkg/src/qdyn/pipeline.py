"""End-to-end experiment orchestration shared by the service and the CLI."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace

import numpy as np

from .builders import build_architecture
from .config import ExperimentConfig, cell_name
from .datasets import Dataset, load_data_path, read_cifar10_binary, synthetic_dataset
from .experiment import QuantReport, run_trials
from .graph import ModelGraph
from .report import (
    combined_layerwise_csv,
    layer_stats_csv,
    layerwise_csv,
    ranges_csv,
    report_json,
    summary_csv,
)

REPORT_FILES = ("report.csv", "report.json", "layerwise_metrics.csv",
                "layerwise_ranges.csv", "layer_stats.csv")


def build_model(config: ExperimentConfig) -> ModelGraph:
    return build_architecture(config.arch, use_gamma=config.use_gamma,
                              init=config.init, seed=config.seed,
                              heterogeneity=config.heterogeneity)


def _synthetic_seeds(seed: int) -> tuple[np.random.SeedSequence, np.random.SeedSequence]:
    return np.random.SeedSequence([seed, 0]), np.random.SeedSequence([seed, 1])


def load_datasets(config: ExperimentConfig) -> tuple[Dataset, Dataset]:
    """(calibration pool, eval set). With no data path, both are synthetic and
    derived from the experiment seed; with a CIFAR-10 directory the train
    batches calibrate and the test batch evaluates; with a single .bin file
    the tail eval_size records evaluate and the rest calibrate."""
    if config.data is None:
        pool_seed, eval_seed = _synthetic_seeds(config.seed)
        pool = synthetic_dataset(config.pool_size, seed=pool_seed)
        eval_set = synthetic_dataset(config.eval_size, seed=eval_seed)
        return pool, eval_set
    if os.path.isdir(config.data):
        train_names = sorted(
            n for n in os.listdir(config.data)
            if n.startswith("data_batch") and n.endswith(".bin")
        )
        test_path = os.path.join(config.data, "test_batch.bin")
        if train_names:
            parts = [read_cifar10_binary(os.path.join(config.data, n)) for n in train_names]
            pool = Dataset(np.concatenate([p.images for p in parts]),
                           np.concatenate([p.labels for p in parts]))
        elif os.path.exists(test_path):
            pool = read_cifar10_binary(test_path)
        else:
            raise ValueError(f"{config.data}: no CIFAR-10 .bin files found")
        if os.path.exists(test_path):
            test = read_cifar10_binary(test_path)
        else:
            test = pool
        n_eval = min(config.eval_size, len(test))
        return pool, test.subset(np.arange(n_eval))
    full = load_data_path(config.data)
    if len(full) <= config.eval_size:
        raise ValueError(
            f"{config.data}: {len(full)} records cannot cover eval_size={config.eval_size} "
            "plus a calibration pool"
        )
    split = len(full) - config.eval_size
    return full.subset(np.arange(split)), full.subset(np.arange(split, len(full)))


def run_experiment(config: ExperimentConfig, name: str | None = None) -> QuantReport:
    model = build_model(config)
    pool, eval_set = load_datasets(config)
    return run_trials(
        model, pool, eval_set,
        n_trials=config.trials,
        batch_size=config.calib_batch,
        percentile=config.percentile,
        seed=config.seed,
        weight_mode=config.weight_mode,
        name=name or config.name(),
        config=config.to_dict(),
    )


def report_files(report: QuantReport) -> dict[str, str]:
    """Filename -> content for one experiment's emitted files."""
    return {
        "report.csv": summary_csv([report]),
        "report.json": report_json(report),
        "layerwise_metrics.csv": layerwise_csv(report),
        "layerwise_ranges.csv": ranges_csv(report),
        "layer_stats.csv": layer_stats_csv(report),
    }


GRID_CELLS = [
    ("glorot_uniform", True),
    ("glorot_uniform", False),
    ("he_normal", True),
    ("he_normal", False),
]


def run_grid(config: ExperimentConfig, jobs: int = 1):
    """The 2x2 init x use_gamma ablation for one architecture.

    Cells run independently (in parallel up to ``jobs``); the combined
    outputs are merged in fixed cell order so results are deterministic
    regardless of scheduling."""
    cells = [replace(config, init=init, use_gamma=gamma).validate()
             for init, gamma in GRID_CELLS]
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            reports = list(pool.map(run_experiment, cells))
    else:
        reports = [run_experiment(c) for c in cells]
    names = [cell_name(config.arch, gamma, init) for init, gamma in GRID_CELLS]
    combined = summary_csv(reports)
    layerwise = combined_layerwise_csv(list(zip(names, reports)))
    return reports, combined, layerwise
