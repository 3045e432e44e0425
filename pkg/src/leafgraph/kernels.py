"""Hot numeric kernels: numba-compiled with a pure-numpy fallback.

Backend selection follows the ``LEAFGRAPH_BACKEND`` environment variable:
``auto`` (default, numba when importable), ``numba``, or ``numpy``.  Both
implementations of every kernel are importable directly (``*_numpy`` /
``*_numba``) so the benchmark and the tests can compare them.

Only the O(n^2 d) similarity kernel runs parallel: each output element is
written by exactly one iteration with a fixed-order inner accumulation, so
results are independent of the numba thread count.  The per-batch kernels
(warps, segment aggregation) stay serial; they are called thousands of times
on small inputs where a parallel launch costs more than the loop.
"""

from __future__ import annotations

import os

import numpy as np

from .errors import DataError

BACKEND_ENV = "LEAFGRAPH_BACKEND"

_choice = os.environ.get(BACKEND_ENV, "auto").lower()
if _choice not in ("auto", "numba", "numpy"):
    raise DataError(f"{BACKEND_ENV} must be auto|numba|numpy, got {_choice!r}")

_HAVE_NUMBA = False
if _choice in ("auto", "numba"):
    try:
        from numba import njit, prange

        _HAVE_NUMBA = True
    except ImportError:
        if _choice == "numba":
            raise

USE_NUMBA = _HAVE_NUMBA

if not _HAVE_NUMBA:  # keep decorated definitions importable

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        if args and callable(args[0]):
            return args[0]
        return wrap

    prange = range


def active_backend() -> str:
    return "numba" if USE_NUMBA else "numpy"


# ---------------------------------------------------------------------------
# pairwise cosine similarity


def pairwise_cosine_numpy(x: np.ndarray) -> np.ndarray:
    norms = np.sqrt(np.einsum("ij,ij->i", x, x))
    nz = norms > 0.0
    xn = np.zeros_like(x)
    xn[nz] = x[nz] / norms[nz, None]
    s = np.einsum("id,jd->ij", xn, xn)
    s = np.triu(s) + np.triu(s, 1).T  # exact symmetry
    np.clip(s, -1.0, 1.0, out=s)
    np.fill_diagonal(s, np.where(nz, 1.0, 0.0))
    return s


@njit(cache=True, parallel=True)
def _pairwise_cosine_nb(x):
    n, d = x.shape
    norms = np.empty(n)
    for i in range(n):
        acc = 0.0
        for t in range(d):
            acc += x[i, t] * x[i, t]
        norms[i] = np.sqrt(acc)
    s = np.zeros((n, n))
    for i in prange(n):
        if norms[i] == 0.0:
            continue
        s[i, i] = 1.0
        for j in range(i + 1, n):
            if norms[j] == 0.0:
                continue
            acc = 0.0
            for t in range(d):
                acc += x[i, t] * x[j, t]
            v = acc / (norms[i] * norms[j])
            if v > 1.0:
                v = 1.0
            elif v < -1.0:
                v = -1.0
            s[i, j] = v
    for i in range(n):
        for j in range(i):
            s[i, j] = s[j, i]
    return s


def pairwise_cosine_numba(x: np.ndarray) -> np.ndarray:
    return _pairwise_cosine_nb(np.ascontiguousarray(x, dtype=np.float64))


def pairwise_cosine(x: np.ndarray) -> np.ndarray:
    """Symmetric cosine matrix in [-1, 1]; zero rows score 0 everywhere."""
    x = np.asarray(x, dtype=np.float64)
    if USE_NUMBA:
        return pairwise_cosine_numba(x)
    return pairwise_cosine_numpy(x)


# ---------------------------------------------------------------------------
# bilinear affine warp (resize, rotate, shift, zoom share this)


def warp_affine_numpy(img, out_h, out_w, coeffs):
    a, b, c, d, e, f = coeffs
    h, w = img.shape[0], img.shape[1]
    ys, xs = np.meshgrid(np.arange(out_h), np.arange(out_w), indexing="ij")
    sx = a * xs + b * ys + c
    sy = d * xs + e * ys + f
    sx = np.clip(sx, 0.0, w - 1.0)
    sy = np.clip(sy, 0.0, h - 1.0)
    x0 = np.floor(sx).astype(np.int64)
    y0 = np.floor(sy).astype(np.int64)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = (sx - x0)[..., None]
    fy = (sy - y0)[..., None]
    p00 = img[y0, x0]
    p01 = img[y0, x1]
    p10 = img[y1, x0]
    p11 = img[y1, x1]
    top = p00 * (1.0 - fx) + p01 * fx
    bot = p10 * (1.0 - fx) + p11 * fx
    return top * (1.0 - fy) + bot * fy


@njit(cache=True)
def _warp_affine_nb(img, out_h, out_w, a, b, c, d, e, f):
    h, w, ch = img.shape
    out = np.empty((out_h, out_w, ch))
    for y in range(out_h):
        for x in range(out_w):
            sx = a * x + b * y + c
            sy = d * x + e * y + f
            if sx < 0.0:
                sx = 0.0
            elif sx > w - 1.0:
                sx = w - 1.0
            if sy < 0.0:
                sy = 0.0
            elif sy > h - 1.0:
                sy = h - 1.0
            x0 = int(np.floor(sx))
            y0 = int(np.floor(sy))
            x1 = min(x0 + 1, w - 1)
            y1 = min(y0 + 1, h - 1)
            fx = sx - x0
            fy = sy - y0
            for k in range(ch):
                top = img[y0, x0, k] * (1.0 - fx) + img[y0, x1, k] * fx
                bot = img[y1, x0, k] * (1.0 - fx) + img[y1, x1, k] * fx
                out[y, x, k] = top * (1.0 - fy) + bot * fy
    return out


def warp_affine_numba(img, out_h, out_w, coeffs):
    a, b, c, d, e, f = (float(v) for v in coeffs)
    return _warp_affine_nb(
        np.ascontiguousarray(img, dtype=np.float64), out_h, out_w, a, b, c, d, e, f
    )


def warp_affine(img: np.ndarray, out_h: int, out_w: int, coeffs) -> np.ndarray:
    """Bilinear sample of ``img`` at src = A @ (x, y) + t with edge clamping.

    ``coeffs`` = (a, b, c, d, e, f): src_x = a*x + b*y + c, src_y = d*x + e*y + f
    for every output pixel (x, y).  Input must be (H, W, C) float64.
    """
    img = np.asarray(img, dtype=np.float64)
    if USE_NUMBA:
        return warp_affine_numba(img, out_h, out_w, coeffs)
    return warp_affine_numpy(img, out_h, out_w, coeffs)


# ---------------------------------------------------------------------------
# segment (per-node neighbor list) aggregation


def segment_mean_numpy(h, offsets, idx):
    k = len(offsets) - 1
    out = np.zeros((k, h.shape[1]))
    for j in range(k):
        lo, hi = offsets[j], offsets[j + 1]
        if hi > lo:
            out[j] = h[idx[lo:hi]].mean(axis=0)
    return out


@njit(cache=True)
def _segment_mean_nb(h, offsets, idx):
    k = offsets.shape[0] - 1
    f = h.shape[1]
    out = np.zeros((k, f))
    for j in range(k):
        lo, hi = offsets[j], offsets[j + 1]
        cnt = hi - lo
        if cnt == 0:
            continue
        for e in range(lo, hi):
            row = idx[e]
            for t in range(f):
                out[j, t] += h[row, t]
        inv = 1.0 / cnt
        for t in range(f):
            out[j, t] *= inv
    return out


def segment_mean_numba(h, offsets, idx):
    return _segment_mean_nb(
        np.ascontiguousarray(h, dtype=np.float64),
        np.ascontiguousarray(offsets, dtype=np.int64),
        np.ascontiguousarray(idx, dtype=np.int64),
    )


def segment_mean(h, offsets, idx):
    """Row j of the result is the mean of h[idx[offsets[j]:offsets[j+1]]];
    empty segments give zero rows."""
    if USE_NUMBA:
        return segment_mean_numba(h, offsets, idx)
    return segment_mean_numpy(np.asarray(h, dtype=np.float64), offsets, idx)


def segment_mean_backward_numpy(dout, offsets, idx, m):
    dh = np.zeros((m, dout.shape[1]))
    for j in range(len(offsets) - 1):
        lo, hi = offsets[j], offsets[j + 1]
        if hi > lo:
            contrib = dout[j] / (hi - lo)
            for e in range(lo, hi):
                dh[idx[e]] += contrib
    return dh


@njit(cache=True)
def _segment_mean_backward_nb(dout, offsets, idx, m):
    f = dout.shape[1]
    dh = np.zeros((m, f))
    for j in range(offsets.shape[0] - 1):
        lo, hi = offsets[j], offsets[j + 1]
        cnt = hi - lo
        if cnt == 0:
            continue
        inv = 1.0 / cnt
        for e in range(lo, hi):
            row = idx[e]
            for t in range(f):
                dh[row, t] += dout[j, t] * inv
    return dh


def segment_mean_backward_numba(dout, offsets, idx, m):
    return _segment_mean_backward_nb(
        np.ascontiguousarray(dout, dtype=np.float64),
        np.ascontiguousarray(offsets, dtype=np.int64),
        np.ascontiguousarray(idx, dtype=np.int64),
        m,
    )


def segment_mean_backward(dout, offsets, idx, m):
    if USE_NUMBA:
        return segment_mean_backward_numba(dout, offsets, idx, m)
    return segment_mean_backward_numpy(np.asarray(dout, dtype=np.float64), offsets, idx, m)


def segment_max_numpy(p, offsets, idx):
    k = len(offsets) - 1
    f = p.shape[1]
    out = np.zeros((k, f))
    arg = np.full((k, f), -1, dtype=np.int64)
    for j in range(k):
        lo, hi = offsets[j], offsets[j + 1]
        if hi == lo:
            continue
        rows = p[idx[lo:hi]]
        am = rows.argmax(axis=0)  # first max wins ties
        out[j] = rows[am, np.arange(f)]
        arg[j] = lo + am
    return out, arg


@njit(cache=True)
def _segment_max_nb(p, offsets, idx):
    k = offsets.shape[0] - 1
    f = p.shape[1]
    out = np.zeros((k, f))
    arg = np.full((k, f), -1, dtype=np.int64)
    for j in range(k):
        lo, hi = offsets[j], offsets[j + 1]
        if hi == lo:
            continue
        for t in range(f):
            best = p[idx[lo], t]
            bat = lo
            for e in range(lo + 1, hi):
                v = p[idx[e], t]
                if v > best:
                    best = v
                    bat = e
            out[j, t] = best
            arg[j, t] = bat
    return out, arg


def segment_max_numba(p, offsets, idx):
    return _segment_max_nb(
        np.ascontiguousarray(p, dtype=np.float64),
        np.ascontiguousarray(offsets, dtype=np.int64),
        np.ascontiguousarray(idx, dtype=np.int64),
    )


def segment_max(p, offsets, idx):
    """Element-wise max per segment plus the winning edge slot (first max on
    ties); empty segments give zeros and slot -1."""
    if USE_NUMBA:
        return segment_max_numba(p, offsets, idx)
    return segment_max_numpy(np.asarray(p, dtype=np.float64), offsets, idx)


def segment_max_backward_numpy(dout, arg, idx, m):
    dp = np.zeros((m, dout.shape[1]))
    k, f = dout.shape
    for j in range(k):
        for t in range(f):
            e = arg[j, t]
            if e >= 0:
                dp[idx[e], t] += dout[j, t]
    return dp


@njit(cache=True)
def _segment_max_backward_nb(dout, arg, idx, m):
    k, f = dout.shape
    dp = np.zeros((m, f))
    for j in range(k):
        for t in range(f):
            e = arg[j, t]
            if e >= 0:
                dp[idx[e], t] += dout[j, t]
    return dp


def segment_max_backward(dout, arg, idx, m):
    if USE_NUMBA:
        return _segment_max_backward_nb(
            np.ascontiguousarray(dout, dtype=np.float64),
            np.ascontiguousarray(arg, dtype=np.int64),
            np.ascontiguousarray(idx, dtype=np.int64),
            m,
        )
    return segment_max_backward_numpy(np.asarray(dout, dtype=np.float64), arg, idx, m)
