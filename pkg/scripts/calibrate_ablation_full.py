"""Stage-2 calibration on the real pipeline: sweep the synthetic-dataset
noise level and graph settings, measure the trained ablation ordering over
three seeds, and freeze the acceptance constants from the result.

Run:  python scripts/calibrate_ablation_full.py
"""

import time

import numpy as np

from leafgraph.data import split, synth_dataset
from leafgraph.models import ModelConfig, ablate
from leafgraph.rng import Rng


def run_setting(sigma, hidden, fans, theta, min_degree, lr=0.001,
                image_noise=0.3, seeds=(101, 202, 303)):
    rows_by_arch = {}
    t0 = time.time()
    for seed in seeds:
        rng = Rng(seed)
        manifest, store, images = synth_dataset(10, 50, 64, sigma, rng,
                                                make_images=True,
                                                image_noise=image_noise)
        manifest = split(manifest, (0.8, 0.1, 0.1), rng.stream("split"))
        cfg = ModelConfig(
            arch="sequential", hidden_dims=hidden, fan_outs=fans, theta=theta,
            min_degree=min_degree, seed=seed, lr=lr,
        )
        for row in ablate(store, manifest, cfg, images):
            rows_by_arch.setdefault(row["arch"], []).append(row["accuracy"])
    elapsed = time.time() - t0
    means = {a: float(np.mean(v)) for a, v in rows_by_arch.items()}
    return means, elapsed


if __name__ == "__main__":
    # lr 1e-3 (the training default) collapses the 2048-wide all-positive
    # pixel layer of gnn_only into the dead-ReLU regime at this scale, so the
    # sweep includes lower rates; (sigma=0.30, lr=5e-4) is the frozen choice.
    print(f"{'sigma':>6} {'lr':>8} {'mdeg':>5} {'cnn':>6} {'gnn':>6} "
          f"{'par':>6} {'seq':>6} {'margin':>7} {'sec':>6}")
    for sigma in (0.30, 0.35):
        for lr in (1e-3, 5e-4):
            for min_degree in (8, 12):
                means, sec = run_setting(sigma, (64,), (10,), 0.2, min_degree,
                                         lr=lr)
                margin = means["sequential"] - means["cnn_only"]
                print(
                    f"{sigma:>6.2f} {lr:>8} {min_degree:>5}"
                    f" {means['cnn_only']:>6.3f} {means['gnn_only']:>6.3f}"
                    f" {means['parallel']:>6.3f} {means['sequential']:>6.3f}"
                    f" {margin:>+7.3f} {sec:>6.1f}", flush=True,
                )
