"""Grad-CAM and Eigen-CAM heatmaps over spatial feature maps, plus rendering.

Both methods end in per-map min-max normalization to [0, 1]; maps whose raw
values are constant (or all non-positive for Grad-CAM) come back all-zero
with the ``degenerate`` flag set instead of dividing by zero.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError, DegenerateInputError, ShapeError
from .images import RawImage, encode_pgm, encode_ppm, resize_bilinear
from .linalg import top_singular_vector


@dataclass
class Heatmap:
    grid: np.ndarray  # (H', W') float64 in [0, 1]
    source: str  # "gradcam" | "eigencam"
    sample_id: str | None = None
    degenerate: bool = False


def _minmax(raw: np.ndarray, source: str, sample_id) -> Heatmap:
    lo = float(raw.min())
    hi = float(raw.max())
    if hi - lo <= 0.0:
        return Heatmap(np.zeros_like(raw), source, sample_id, degenerate=True)
    return Heatmap((raw - lo) / (hi - lo), source, sample_id)


def eigen_cam(feature_map: np.ndarray, sample_id: str | None = None) -> Heatmap:
    """Projection of the (H'W') x C' feature matrix onto its top right
    singular vector, sign-fixed so the projection sums non-negative."""
    fm = np.asarray(feature_map, dtype=np.float64)
    if fm.ndim != 3:
        raise ShapeError(f"expected (H, W, C) feature map, got {fm.shape}")
    h, w, c = fm.shape
    m = fm.reshape(h * w, c)
    try:
        res = top_singular_vector(m)
    except DegenerateInputError:
        return Heatmap(np.zeros((h, w)), "eigencam", sample_id, degenerate=True)
    raw = (m @ res.v).reshape(h, w)
    return _minmax(raw, "eigencam", sample_id)


def grad_cam(model_like, feature_map: np.ndarray, class_index: int,
             sample_id: str | None = None) -> Heatmap:
    """Channel-weighted ReLU map for one class.

    ``model_like`` exposes ``pooled_logit_grad(pooled_vector, class_index) ->
    (score, grad)``; since pooling is the per-channel spatial mean, the
    channel weights are grad / (H' * W') and the raw map is
    ReLU(sum_c alpha_c * A[..., c]).
    """
    fm = np.asarray(feature_map, dtype=np.float64)
    if fm.ndim != 3:
        raise ShapeError(f"expected (H, W, C) feature map, got {fm.shape}")
    h, w, c = fm.shape
    pooled = fm.mean(axis=(0, 1))
    if hasattr(model_like, "pooled_logit_grad"):
        _score, grad = model_like.pooled_logit_grad(pooled, class_index)
    else:  # plain function hook
        _score, grad = model_like(pooled, class_index)
    grad = np.asarray(grad, dtype=np.float64).ravel()
    if grad.shape[0] != c:
        raise ShapeError(f"gradient has {grad.shape[0]} channels, map has {c}")
    alpha = grad / (h * w)
    raw = np.maximum(fm @ alpha, 0.0)
    if not raw.any():
        return Heatmap(np.zeros((h, w)), "gradcam", sample_id, degenerate=True)
    return _minmax(raw, "gradcam", sample_id)


# ---------------------------------------------------------------------------
# rendering

_RAMP = None


def color_ramp() -> np.ndarray:
    """Fixed 256-entry blue -> cyan -> yellow -> red ramp (uint8 RGB)."""
    global _RAMP
    if _RAMP is None:
        t = np.arange(256) / 255.0
        r = np.clip(np.minimum(4.0 * t - 1.5, -4.0 * t + 4.5), 0.0, 1.0)
        g = np.clip(np.minimum(4.0 * t - 0.5, -4.0 * t + 3.5), 0.0, 1.0)
        b = np.clip(np.minimum(4.0 * t + 0.5, -4.0 * t + 2.5), 0.0, 1.0)
        _RAMP = np.round(np.stack([r, g, b], axis=1) * 255.0).astype(np.uint8)
    return _RAMP


def render(heatmap: Heatmap, base_image: RawImage | None, path,
           montage_path=None) -> None:
    """Write the heatmap as an 8-bit PGM, upsampled to the base image size
    when one is given; optionally also a side-by-side PPM montage with the
    colorized map blended 50/50 over the base."""
    grid = heatmap.grid
    if base_image is not None:
        grid = resize_bilinear(grid, base_image.height, base_image.width)[:, :, 0]
        grid = np.clip(grid, 0.0, 1.0)
    levels = np.round(grid * 255.0).astype(np.uint8)
    Path(path).write_bytes(encode_pgm(levels))

    if montage_path is not None:
        if base_image is None:
            raise DataError("montage rendering needs a base image")
        base = base_image.to_float()
        if base.shape[2] == 1:
            base = np.repeat(base, 3, axis=2)
        colored = color_ramp()[levels].astype(np.float64)
        blend = np.round(0.5 * base + 0.5 * colored).astype(np.uint8)
        side = np.concatenate([base.astype(np.uint8), blend], axis=1)
        Path(montage_path).write_bytes(encode_ppm(side))
