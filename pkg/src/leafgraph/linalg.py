"""Dense linear algebra helpers: checked matmul, power-iteration SVD,
finite-difference gradient checking."""

from __future__ import annotations

from typing import Callable, NamedTuple

import numpy as np

from .errors import DegenerateInputError, EvaluationError, ShapeError
from .rng import Rng


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix product with an explicit shape check."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


class PowerIterationResult(NamedTuple):
    u: np.ndarray
    sigma: float
    v: np.ndarray
    converged: bool


def top_singular_vector(
    a: np.ndarray, max_iters: int = 200, tol: float = 1e-9
) -> PowerIterationResult:
    """Dominant singular triple of ``a`` by power iteration on ``a.T @ a``.

    Returns unit-norm ``v``, ``sigma = ||a @ v||`` and ``u = a @ v / sigma``,
    with the sign flipped jointly so that ``sum(u) >= 0``.  Stops when the
    successive sigma change drops below ``tol`` (relative to max(1, sigma));
    if ``max_iters`` is exhausted first the best iterate is returned with
    ``converged=False``.
    """
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise ShapeError(f"expected a matrix, got shape {a.shape}")
    if max_iters < 1 or tol <= 0.0:
        raise ValueError("max_iters must be >= 1 and tol > 0")
    if not np.any(a):
        raise DegenerateInputError("zero matrix has no dominant singular vector")

    # fixed seeded start so results are reproducible
    v = Rng(0x5EED_0F_70B1A5).stream("power-iteration").normal(a.shape[1])
    v /= np.linalg.norm(v)
    sigma = float(np.linalg.norm(a @ v))
    converged = False
    for _ in range(max_iters):
        w = a.T @ (a @ v)
        norm = np.linalg.norm(w)
        if norm == 0.0:
            # v landed in the null space; restart from a shifted vector
            v = np.roll(v, 1) + 1.0 / a.shape[1]
            v /= np.linalg.norm(v)
            continue
        v = w / norm
        new_sigma = float(np.linalg.norm(a @ v))
        if abs(new_sigma - sigma) <= tol * max(1.0, new_sigma):
            sigma = new_sigma
            converged = True
            break
        sigma = new_sigma

    u = a @ v
    norm_u = np.linalg.norm(u)
    if norm_u > 0.0:
        u = u / norm_u
    if u.sum() < 0.0:
        u = -u
        v = -v
    return PowerIterationResult(u, sigma, v, converged)


def finite_diff_check(
    f: Callable[[np.ndarray], float],
    x: np.ndarray,
    analytic_grad: np.ndarray,
    h: float = 1e-5,
) -> float:
    """Max relative error between central differences of ``f`` and
    ``analytic_grad``, with denominator max(1, |fd|, |analytic|)."""
    x = np.asarray(x, dtype=np.float64)
    g = np.asarray(analytic_grad, dtype=np.float64)
    if x.shape != g.shape:
        raise ShapeError(f"gradient shape {g.shape} != input shape {x.shape}")
    if not (1e-6 <= h <= 1e-2):
        raise ValueError("h must lie in [1e-6, 1e-2]")
    flat_x = x.ravel()
    flat_g = g.ravel()
    worst = 0.0
    for i in range(flat_x.size):
        orig = flat_x[i]
        flat_x[i] = orig + h
        f_plus = float(f(x))
        flat_x[i] = orig - h
        f_minus = float(f(x))
        flat_x[i] = orig
        if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
            raise EvaluationError(f"non-finite value of f at coordinate {i}")
        fd = (f_plus - f_minus) / (2.0 * h)
        err = abs(fd - flat_g[i]) / max(1.0, abs(fd), abs(flat_g[i]))
        worst = max(worst, err)
    return worst
