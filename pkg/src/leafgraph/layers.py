"""Neural layers with hand-written backward passes, plus Adam.

Every forward either returns the values needed for its backward or a cache
object; backward calls accumulate parameter gradients in place and return the
gradient with respect to their inputs.  All math is float64.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import DataError, ShapeError
from .rng import Rng


@dataclass
class LayerParams:
    name: str
    weight: np.ndarray  # (out, in)
    bias: np.ndarray | None  # (out,) or None in strict no-bias mode
    grad_weight: np.ndarray = field(init=False)
    grad_bias: np.ndarray | None = field(init=False)

    def __post_init__(self):
        self.grad_weight = np.zeros_like(self.weight)
        self.grad_bias = None if self.bias is None else np.zeros_like(self.bias)

    @property
    def out_dim(self) -> int:
        return self.weight.shape[0]

    @property
    def in_dim(self) -> int:
        return self.weight.shape[1]

    def zero_grads(self) -> None:
        self.grad_weight[:] = 0.0
        if self.grad_bias is not None:
            self.grad_bias[:] = 0.0

    def param_count(self) -> int:
        return self.weight.size + (0 if self.bias is None else self.bias.size)


def init_layer(
    name: str, in_dim: int, out_dim: int, rng: Rng, use_bias: bool = True
) -> LayerParams:
    """Glorot-uniform weight, zero bias."""
    if in_dim < 1 or out_dim < 1:
        raise DataError(f"layer {name}: dims must be positive, got {in_dim}->{out_dim}")
    lim = np.sqrt(6.0 / (in_dim + out_dim))
    w = rng.uniform_range(-lim, lim, out_dim * in_dim).reshape(out_dim, in_dim)
    b = np.zeros(out_dim) if use_bias else None
    return LayerParams(name, w, b)


def linear_forward(p: LayerParams, x: np.ndarray) -> np.ndarray:
    if x.ndim != 2 or x.shape[1] != p.in_dim:
        raise ShapeError(
            f"layer {p.name}: input {x.shape} incompatible with weight {p.weight.shape}"
        )
    y = x @ p.weight.T
    if p.bias is not None:
        y += p.bias
    return y


def linear_backward(p: LayerParams, x: np.ndarray, dy: np.ndarray) -> np.ndarray:
    if dy.shape != (x.shape[0], p.out_dim):
        raise ShapeError(f"layer {p.name}: upstream gradient shape {dy.shape}")
    p.grad_weight += dy.T @ x
    if p.grad_bias is not None:
        p.grad_bias += dy.sum(axis=0)
    return dy @ p.weight


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def relu_backward(x: np.ndarray, dy: np.ndarray) -> np.ndarray:
    return dy * (x > 0.0)  # subgradient at 0 is 0


def dropout(x: np.ndarray, rate: float, train: bool, rng: Rng | None = None):
    """Inverted dropout: scales kept values by 1/(1-rate) in train mode.

    Returns (output, mask); eval mode is the exact identity with mask None.
    """
    if not 0.0 <= rate < 1.0:
        raise DataError(f"dropout rate must lie in [0, 1), got {rate}")
    if not train or rate == 0.0:
        return x, None
    keep = rng.uniform(x.size).reshape(x.shape) >= rate
    mask = keep / (1.0 - rate)
    return x * mask, mask


def dropout_backward(dy: np.ndarray, mask: np.ndarray | None) -> np.ndarray:
    return dy if mask is None else dy * mask


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def softmax_cross_entropy(logits: np.ndarray, onehot: np.ndarray):
    """Mean cross-entropy over the batch.

    Returns (loss, probs, dlogits) with dlogits = (probs - onehot) / B.
    """
    if logits.shape != onehot.shape:
        raise ShapeError(f"logits {logits.shape} vs onehot {onehot.shape}")
    if logits.shape[1] < 2:
        raise DataError("need at least 2 classes")
    z = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(z).sum(axis=1, keepdims=True))
    logp = z - log_norm
    b = logits.shape[0]
    loss = float(-(onehot * logp).sum() / b)
    probs = np.exp(logp)
    return loss, probs, (probs - onehot) / b


# ---------------------------------------------------------------------------
# graph layers


def gcn_layer_forward(a_hat: np.ndarray, h: np.ndarray, p: LayerParams):
    """ReLU(a_hat @ h @ W.T + b); returns (out, cache)."""
    if a_hat.shape[0] != a_hat.shape[1] or a_hat.shape[1] != h.shape[0]:
        raise ShapeError(f"a_hat {a_hat.shape} vs features {h.shape}")
    z = a_hat @ h
    y = linear_forward(p, z)
    return relu(y), (a_hat, h, z, y)


def gcn_layer_backward(p: LayerParams, cache, dout: np.ndarray) -> np.ndarray:
    a_hat, _h, z, y = cache
    dy = relu_backward(y, dout)
    dz = linear_backward(p, z, dy)
    return a_hat.T @ dz


@dataclass
class SageLayer:
    """One GraphSAGE layer: ReLU(W [h_self || AGG(h_neighbors)] + b).

    The mean aggregator averages sampled neighbor rows (zeros when there are
    none); maxpool projects neighbors through a shared ReLU linear map first
    and takes the element-wise max.  Optional L2 row normalization.
    """

    params: LayerParams
    pool: LayerParams | None = None  # maxpool pre-projection
    aggregator: str = "mean"
    l2_normalize: bool = False

    def layer_params(self) -> list[LayerParams]:
        return [self.params] + ([self.pool] if self.pool is not None else [])

    def forward(self, h_prev, self_pos, nbr_offsets, nbr_pos):
        """h_prev: (m, F) features of the deeper level; self_pos: positions of
        this level's nodes in h_prev; nbr_offsets/nbr_pos: sampled neighbor
        positions per node."""
        f = h_prev.shape[1]
        if self.aggregator == "mean":
            agg = kernels.segment_mean(h_prev, nbr_offsets, nbr_pos)
            pool_cache = None
        elif self.aggregator == "maxpool":
            pre_lin = linear_forward(self.pool, h_prev)
            pre = relu(pre_lin)
            agg, arg = kernels.segment_max(pre, nbr_offsets, nbr_pos)
            pool_cache = (pre_lin, pre, arg)
        else:
            raise DataError(f"unknown aggregator {self.aggregator!r}")
        if self.params.in_dim != f + agg.shape[1]:
            raise ShapeError(
                f"layer {self.params.name}: weight expects {self.params.in_dim} inputs,"
                f" got {f + agg.shape[1]}"
            )
        z = np.hstack([h_prev[self_pos], agg])
        y = linear_forward(self.params, z)
        out = relu(y)
        norms = None
        if self.l2_normalize:
            norms = np.linalg.norm(out, axis=1, keepdims=True)
            safe = np.where(norms > 0.0, norms, 1.0)
            out = out / safe
        cache = (h_prev, self_pos, nbr_offsets, nbr_pos, z, y, pool_cache, norms)
        return out, cache

    def backward(self, cache, dout):
        h_prev, self_pos, nbr_offsets, nbr_pos, z, y, pool_cache, norms = cache
        if self.l2_normalize:
            safe = np.where(norms > 0.0, norms, 1.0)
            r = relu(y) / safe
            dout = (dout - r * (r * dout).sum(axis=1, keepdims=True)) / safe
        dy = relu_backward(y, dout)
        dz = linear_backward(self.params, z, dy)
        f = h_prev.shape[1]
        dself = dz[:, :f]
        dagg = dz[:, f:]
        dh_prev = np.zeros_like(h_prev)
        np.add.at(dh_prev, self_pos, dself)
        m = h_prev.shape[0]
        if self.aggregator == "mean":
            dh_prev += kernels.segment_mean_backward(dagg, nbr_offsets, nbr_pos, m)
        else:
            pre_lin, _pre, arg = pool_cache
            dpre = kernels.segment_max_backward(dagg, arg, nbr_pos, m)
            dpre = relu_backward(pre_lin, dpre)
            dh_prev += linear_backward(self.pool, h_prev, dpre)
        return dh_prev


def make_sage_layer(
    name: str,
    in_dim: int,
    out_dim: int,
    rng: Rng,
    aggregator: str = "mean",
    l2_normalize: bool = False,
    use_bias: bool = True,
) -> SageLayer:
    """Aggregate width equals the input width, so the main weight always sees
    2 * in_dim columns."""
    pool = None
    if aggregator == "maxpool":
        pool = init_layer(f"{name}.pool", in_dim, in_dim, rng, use_bias)
    params = init_layer(name, 2 * in_dim, out_dim, rng, use_bias)
    return SageLayer(params, pool, aggregator, l2_normalize)


# ---------------------------------------------------------------------------
# optimizer


@dataclass
class AdamState:
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    slots: dict = field(default_factory=dict)

    def _slot(self, key: str, like: np.ndarray):
        if key not in self.slots:
            self.slots[key] = (np.zeros_like(like), np.zeros_like(like))
        return self.slots[key]


def adam_step(params: list[LayerParams], state: AdamState) -> None:
    """One bias-corrected Adam update over all layer parameters."""
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    correction1 = 1.0 - b1**state.t
    correction2 = 1.0 - b2**state.t
    for p in params:
        tensors = [("w", p.weight, p.grad_weight)]
        if p.bias is not None:
            tensors.append(("b", p.bias, p.grad_bias))
        for tag, value, grad in tensors:
            m, v = state._slot(f"{p.name}/{tag}", value)
            m += (1.0 - b1) * (grad - m)
            v += (1.0 - b2) * (grad * grad - v)
            m_hat = m / correction1
            v_hat = v / correction2
            value -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
