"""Binary PPM/PGM decoding, bilinear resizing, normalization, augmentation.

Only the binary netpbm formats (P5 grayscale, P6 RGB) with maxval 255 are
supported.  All geometric operations use bilinear sampling with half-pixel
center alignment and nearest-edge padding, so outputs never leave the input
value range.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DataError, FormatError
from .rng import Rng


@dataclass
class RawImage:
    height: int
    width: int
    channels: int
    data: np.ndarray  # (H, W, C) uint8

    def __post_init__(self):
        if self.height < 1 or self.width < 1:
            raise DataError("image dimensions must be >= 1")
        if self.channels not in (1, 3):
            raise DataError(f"channels must be 1 or 3, got {self.channels}")
        self.data = np.asarray(self.data, dtype=np.uint8).reshape(
            self.height, self.width, self.channels
        )

    def to_float(self) -> np.ndarray:
        """(H, W, C) float64 copy in [0, 255]."""
        return self.data.astype(np.float64)


@dataclass
class AugmentSpec:
    max_rotation_deg: float = 20.0
    horizontal_flip: bool = True
    max_shift_frac: float = 0.2
    max_zoom_frac: float = 0.2
    rng_stream: str = "augment"

    def __post_init__(self):
        if not 0.0 <= self.max_rotation_deg <= 180.0:
            raise DataError("max_rotation_deg must lie in [0, 180]")
        if not 0.0 <= self.max_shift_frac < 1.0:
            raise DataError("max_shift_frac must lie in [0, 1)")
        if not 0.0 <= self.max_zoom_frac < 1.0:
            raise DataError("max_zoom_frac must lie in [0, 1)")


# ---------------------------------------------------------------------------
# netpbm decode/encode


def _next_token(buf: bytes, pos: int) -> tuple[bytes, int]:
    n = len(buf)
    while pos < n:
        c = buf[pos : pos + 1]
        if c == b"#":  # comment runs to end of line
            while pos < n and buf[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
        elif c.isspace():
            pos += 1
        else:
            break
    if pos >= n:
        raise FormatError(f"truncated header at byte {pos}")
    start = pos
    while pos < n and not buf[pos : pos + 1].isspace():
        pos += 1
    return buf[start:pos], pos


def decode_ppm(data: bytes) -> RawImage:
    """Decode binary PGM (P5) or PPM (P6) bytes with maxval 255."""
    if len(data) < 2:
        raise FormatError("truncated header at byte 0")
    magic, pos = _next_token(data, 0)
    if magic == b"P5":
        channels = 1
    elif magic == b"P6":
        channels = 3
    else:
        raise FormatError(f"bad magic {magic!r} at byte 0, expected P5 or P6")
    fields = []
    for _ in range(3):  # width, height, maxval
        tok, pos = _next_token(data, pos)
        if not tok.isdigit():
            raise FormatError(f"non-numeric header field {tok!r} at byte {pos - len(tok)}")
        fields.append(int(tok))
    width, height, maxval = fields
    if maxval != 255:
        raise FormatError(f"unsupported maxval {maxval} at byte {pos - len(str(maxval))}")
    if width < 1 or height < 1:
        raise FormatError(f"bad dimensions {width}x{height}")
    pos += 1  # exactly one whitespace byte separates header from payload
    expected = height * width * channels
    payload = data[pos : pos + expected]
    if len(payload) != expected:
        raise FormatError(
            f"truncated payload at byte {pos}: expected {expected} bytes, got {len(payload)}"
        )
    pixels = np.frombuffer(payload, dtype=np.uint8).reshape(height, width, channels)
    return RawImage(height, width, channels, pixels.copy())


def encode_pgm(gray: np.ndarray) -> bytes:
    """Binary P5 bytes from a (H, W) or (H, W, 1) uint8 array."""
    arr = np.asarray(gray, dtype=np.uint8)
    if arr.ndim == 3:
        arr = arr[:, :, 0]
    h, w = arr.shape
    return b"P5\n%d %d\n255\n" % (w, h) + arr.tobytes()


def encode_ppm(rgb: np.ndarray) -> bytes:
    """Binary P6 bytes from a (H, W, 3) uint8 array."""
    arr = np.asarray(rgb, dtype=np.uint8)
    h, w, c = arr.shape
    if c != 3:
        raise DataError("encode_ppm expects 3 channels")
    return b"P6\n%d %d\n255\n" % (w, h) + arr.tobytes()


# ---------------------------------------------------------------------------
# geometry


def _ensure_hwc(img) -> np.ndarray:
    if isinstance(img, RawImage):
        img = img.to_float()
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.ndim != 3:
        raise DataError(f"expected (H, W, C) image, got shape {arr.shape}")
    return arr


def resize_bilinear(img, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resize with half-pixel-center alignment; returns float64."""
    arr = _ensure_hwc(img)
    if out_h < 1 or out_w < 1:
        raise DataError("output dimensions must be >= 1")
    h, w = arr.shape[0], arr.shape[1]
    sx = w / out_w
    sy = h / out_h
    coeffs = (sx, 0.0, 0.5 * sx - 0.5, 0.0, sy, 0.5 * sy - 0.5)
    return kernels.warp_affine(arr, out_h, out_w, coeffs)


def normalize(img) -> np.ndarray:
    """Scale [0, 255] values down to [0, 1]."""
    arr = np.asarray(img, dtype=np.float64)
    if arr.size and (arr.min() < 0.0 or arr.max() > 255.0):
        raise DataError(
            f"values outside [0, 255]: min {arr.min():.6g}, max {arr.max():.6g}"
        )
    return arr / 255.0


def channel_mean(img) -> np.ndarray:
    """(H, W) mean over channels; identity view for single-channel input."""
    arr = _ensure_hwc(img)
    return arr.mean(axis=2)


def rotate(img, angle_deg: float) -> np.ndarray:
    """Rotate about the image center; bilinear, edge padded."""
    arr = _ensure_hwc(img)
    if angle_deg == 0.0:
        return arr.copy()
    h, w = arr.shape[0], arr.shape[1]
    cx, cy = (w - 1) / 2.0, (h - 1) / 2.0
    th = math.radians(angle_deg)
    cos_t, sin_t = math.cos(th), math.sin(th)
    # inverse rotation of output coords around (cx, cy)
    a, b = cos_t, sin_t
    d, e = -sin_t, cos_t
    c = cx - a * cx - b * cy
    f = cy - d * cx - e * cy
    return kernels.warp_affine(arr, h, w, (a, b, c, d, e, f))


def shift(img, dx: float, dy: float) -> np.ndarray:
    """Translate content by (dx, dy) pixels; edge padded."""
    arr = _ensure_hwc(img)
    if dx == 0.0 and dy == 0.0:
        return arr.copy()
    h, w = arr.shape[0], arr.shape[1]
    return kernels.warp_affine(arr, h, w, (1.0, 0.0, -dx, 0.0, 1.0, -dy))


def zoom(img, factor: float) -> np.ndarray:
    """Scale about the image center; factor > 1 zooms in."""
    arr = _ensure_hwc(img)
    if factor <= 0.0:
        raise DataError("zoom factor must be positive")
    if factor == 1.0:
        return arr.copy()
    h, w = arr.shape[0], arr.shape[1]
    cx, cy = (w - 1) / 2.0, (h - 1) / 2.0
    inv = 1.0 / factor
    return kernels.warp_affine(
        arr, h, w, (inv, 0.0, cx - inv * cx, 0.0, inv, cy - inv * cy)
    )


def augment(img, spec: AugmentSpec, rng: Rng) -> np.ndarray:
    """Apply rotate -> flip -> shift -> zoom with parameters drawn from rng.

    All five random draws happen regardless of which stages are enabled so
    the stream position depends only on the call count.  Input is expected
    normalized to [0, 1]; output stays in range (edge padding only).
    """
    arr = _ensure_hwc(img)
    h, w = arr.shape[0], arr.shape[1]
    angle = rng.uniform_range(-spec.max_rotation_deg, spec.max_rotation_deg)
    flip_draw = rng.uniform()
    dx = rng.uniform_range(-spec.max_shift_frac, spec.max_shift_frac) * w
    dy = rng.uniform_range(-spec.max_shift_frac, spec.max_shift_frac) * h
    factor = rng.uniform_range(1.0 - spec.max_zoom_frac, 1.0 + spec.max_zoom_frac)

    out = arr
    if angle != 0.0:
        out = rotate(out, angle)
    if spec.horizontal_flip and flip_draw < 0.5:
        out = out[:, ::-1, :].copy()
    if dx != 0.0 or dy != 0.0:
        out = shift(out, dx, dy)
    if factor != 1.0:
        out = zoom(out, factor)
    return out
