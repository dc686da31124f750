#!/usr/bin/env python3
"""Generate the shipped tabulated benchmark suite.

Each task ships as <name>.csv (header = dimension names + `value`, one row
per config in enumeration order) plus a <name>.json sidecar {name,
direction, metric, count, dimensions}. Values are synthetic but structured:
a single smooth peak (or valley) at a seeded location with mild noise, so
solvers face a realistic unimodal-with-texture landscape and every table
has a unique global optimum at a fixed, plausible value.

Regeneration is deterministic; run from the repo root:
    python3 scripts/make_benchmarks.py
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

OUT_DIR = Path(__file__).resolve().parent.parent / "benchmarks"

BTCV_MODELS = [
    "nnU-Net", "nnU-Net-ResEnc", "MedNeXt-S", "MedNeXt-L", "UNETR",
    "SwinUNETR", "SwinUNETRV2", "nnFormer", "CoTr", "Attention-UNet",
    "U-Mamba-Bot", "U-Mamba-Enc", "SegMamba", "STU-Net-S", "STU-Net-B",
    "STU-Net-L", "SegResNet", "V-Net", "TransUNet",
]

TABLES = [
    {
        "name": "boston_random_forest",
        "metric": "r2",
        "direction": "maximize",
        "best": 0.841,
        "worst": 0.62,
        "dimensions": {
            "n-estimators": [100, 200, 300],
            "max-depth": ["None", 10, 20],
            "min-samples-split": [2, 5, 10],
            "min-samples-leaf": [1, 2, 5],
            "max-features": ["sqrt", "log2"],
        },
    },
    {
        "name": "lstm_sentiment",
        "metric": "accuracy",
        "direction": "maximize",
        "best": 0.96,
        "worst": 0.71,
        "dimensions": {
            "hidden-size": [32, 64, 128, 256, 512],
            "learning-rate": [0.1, 0.01, 0.001, 0.0001],
        },
    },
    {
        "name": "tensor_wheel",
        "metric": "psnr",
        "direction": "maximize",
        "best": 41.50,
        "worst": 28.9,
        "dimensions": {
            "rank": [2, 4, 6, 8],
            "lambda": [0.001, 0.01, 0.1, 1.0],
            "max-iters": [50, 100, 200, 400],
        },
    },
    {
        "name": "siren_denoising",
        "metric": "psnr",
        "direction": "maximize",
        "best": 24.78,
        "worst": 14.2,
        "dimensions": {
            "learning-rate": [1e-05, 0.0001, 0.001, 0.01, 0.1],
            "hidden-features": [32, 64, 128, 256, 512],
        },
    },
    {
        "name": "siren_segmentation",
        "metric": "psnr",
        "direction": "maximize",
        "best": 16.63,
        "worst": 6.4,
        "dimensions": {
            "learning-rate": [1e-05, 0.0001, 0.001, 0.01, 0.1],
            "omega-0": [5, 10, 20, 30, 40],
        },
    },
    {
        "name": "mae_classification",
        "metric": "accuracy",
        "direction": "maximize",
        "best": 85.0,
        "worst": 76.5,
        "dimensions": {
            "strategy": ["linear-probe", "fine-tune"],
            "masking-rate": [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9],
        },
    },
    {
        "name": "resnet_imagenet",
        "metric": "top1-error",
        "direction": "minimize",
        "best": 21.43,
        "worst": 30.1,
        "dimensions": {
            "depth": [50, 101, 152],
            "width-multiplier": [1.0, 1.5, 2.0],
            "stem": ["deep"],
            "downsample": ["avg"],
        },
    },
    {
        "name": "lcbench_fashion",
        "metric": "accuracy",
        "direction": "maximize",
        "best": 88.29,
        "worst": 62.0,
        "dimensions": {
            "learning-rate": [0.0001, 0.001, 0.01, 0.05, 0.1],
            "batch-size": [16, 32, 64, 128, 256],
            "num-layers": [1, 2, 3, 4],
            "max-units": [64, 128, 256, 512, 1024],
            "dropout": [0.0, 0.2, 0.4, 0.6],
        },
    },
    {
        "name": "nnunet_brats",
        "metric": "dice",
        "direction": "maximize",
        "best": 82.45,
        "worst": 74.8,
        "dimensions": {
            "patch-size": ["small", "medium", "large"],
            "batch-size": [2, 4, 6],
            "optimizer": ["sgd", "adamw"],
        },
    },
    {
        "name": "nnunet_btcv",
        "metric": "dice",
        "direction": "maximize",
        "best": 85.04,
        "worst": 70.2,
        "dimensions": {"model": BTCV_MODELS},
    },
    {
        "name": "graphsage_cora",
        "metric": "f1",
        "direction": "maximize",
        "best": 89.282,
        "worst": 80.1,
        "dimensions": {
            "hidden-units": [16, 32, 64, 128, 256],
            "learning-rate": [0.05, 0.01, 0.005, 0.001, 0.0005],
        },
    },
    {
        "name": "chagas_bioactivity",
        "metric": "auc",
        "direction": "maximize",
        "best": 0.754,
        "worst": 0.55,
        "dimensions": {
            "learning-rate": [0.01, 0.005, 0.001, 0.0005, 0.0001],
            "hidden-layers": [1, 2, 3],
            "dropout": [0.2, 0.5],
            "batch-size": [64],
        },
    },
]


def enumeration(dimensions: dict) -> list[dict]:
    configs = [dict()]
    for name, values in dimensions.items():
        configs = [dict(c, **{name: v}) for c in configs for v in values]
    return configs


def synthesize(spec: dict) -> list[float]:
    """Peaked landscape: distance to a seeded peak cell drives the value,
    plus noise bounded well below the peak so the optimum is unique."""
    dims = spec["dimensions"]
    rng = np.random.default_rng(abs(hash(spec["name"])) % (2**32) or 7)
    rng = np.random.default_rng(int.from_bytes(spec["name"].encode(), "little") % (2**32))
    sizes = [len(v) for v in dims.values()]
    peak = [int(rng.integers(0, s)) for s in sizes]

    values = []
    for number in range(int(np.prod(sizes))):
        digits = []
        rem = number
        for size in reversed(sizes):
            rem, digit = divmod(rem, size)
            digits.append(digit)
        digits.reverse()
        dist = sum(
            ((d - p) / max(1, s - 1)) ** 2 for d, p, s in zip(digits, peak, sizes)
        )
        base = float(np.exp(-3.0 * dist))
        noise = float(rng.uniform(-0.06, 0.06))
        raw = base + noise
        values.append(raw)

    arr = np.asarray(values)
    peak_number = 0
    rem_sizes = sizes[:]
    for digit, size in zip(peak, sizes):
        peak_number = peak_number * size + digit
    # squeeze everything except the peak into [0, 0.97], pin the peak at 1
    others = np.delete(arr, peak_number)
    lo, hi = float(others.min()), float(others.max())
    scaled = (arr - lo) / (hi - lo) * 0.97
    scaled[peak_number] = 1.0

    best, worst = spec["best"], spec["worst"]
    if spec["direction"] == "maximize":
        final = worst + (best - worst) * scaled
    else:
        final = worst - (worst - best) * scaled  # best is the minimum
    rounded = [round(float(v), 4) for v in final]
    rounded[peak_number] = round(float(best), 4)
    return rounded


def write_table(spec: dict, out_dir: Path) -> None:
    dims = spec["dimensions"]
    values = synthesize(spec)
    configs = enumeration(dims)
    assert len(configs) == len(values)

    csv_path = out_dir / f"{spec['name']}.csv"
    with csv_path.open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(list(dims) + ["value"])
        for config, value in zip(configs, values):
            writer.writerow([config[name] for name in dims] + [repr(value)])

    sidecar = {
        "name": spec["name"],
        "direction": spec["direction"],
        "metric": spec["metric"],
        "count": len(configs),
        "dimensions": dims,
    }
    (out_dir / f"{spec['name']}.json").write_text(json.dumps(sidecar, indent=2) + "\n")
    print(f"{spec['name']}: {len(configs)} configs -> {csv_path.name}")


def main() -> None:
    OUT_DIR.mkdir(exist_ok=True)
    for spec in TABLES:
        write_table(spec, OUT_DIR)


if __name__ == "__main__":
    main()
