"""Model assembly, training, inductive prediction, ablation, checkpoints.

Four architectures share one parameter/optimizer stack:

* ``cnn_only``     feature head: hidden linear + ReLU + dropout + softmax
* ``gnn_only``     similarity graph over 32x32 grayscale pixel features
* ``parallel``     feature-head branch and graph branch, embeddings concatenated
* ``sequential``   similarity graph over pooled feature vectors (proposed)

Graphs are built over training rows only.  At inference a query row attaches
to the training graph through the same threshold + degree-floor rule
(symmetric edges, full neighborhoods, no sampling); a query that is
bit-identical to a training row is treated as that row re-presented rather
than as a new twin node, which keeps inductive and transductive outputs
identical.

Checkpoint layout (LGCK, little-endian):

    magic b"LGCK" | u32 version=1 | u32 header_len | UTF-8 JSON header
    | raw f32 tensor payloads in directory order

The JSON header carries arch, config, class table, training row ids, and a
tensor directory name -> (shape, byte offset into the payload, byte length).
The training graph itself travels as a sibling LGGR cache (the checkpoint
stores the training features, so the graph can also be rebuilt from them).
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import images as img_ops
from .data import DatasetManifest, FeatureStore, one_hot
from .errors import DataError, DivergenceError, FormatError, ShapeError
from .graph import (
    SimilarityGraph,
    build_adjacency,
    full_neighbor_sample,
    sample_neighbors,
)
from .layers import (
    AdamState,
    LayerParams,
    SageLayer,
    adam_step,
    dropout,
    dropout_backward,
    init_layer,
    linear_backward,
    linear_forward,
    make_sage_layer,
    relu,
    relu_backward,
    softmax,
    softmax_cross_entropy,
)
from .rng import Rng

LGCK_MAGIC = b"LGCK"
LGCK_VERSION = 1

ARCHS = ("cnn_only", "gnn_only", "parallel", "sequential")
GRAPH_ARCHS = ("gnn_only", "parallel", "sequential")


@dataclass
class ModelConfig:
    arch: str = "sequential"
    hidden_dims: tuple[int, ...] = (64, 64)
    layers: int | None = None
    aggregator: str = "mean"
    dropout: float = 0.5
    lr: float = 0.001
    batch_size: int = 32
    epochs: int = 20
    theta: float = 0.7
    min_degree: int = 3
    fan_outs: tuple[int, ...] = (10, 10)
    seed: int = 0
    l2_normalize: bool = False
    use_bias: bool = True
    gnn_image_size: int = 32

    def __post_init__(self):
        self.hidden_dims = tuple(int(d) for d in self.hidden_dims)
        self.fan_outs = tuple(int(f) for f in self.fan_outs)
        if self.arch not in ARCHS:
            raise DataError(f"unknown arch {self.arch!r}")
        if not self.hidden_dims or any(d < 1 for d in self.hidden_dims):
            raise DataError(f"hidden_dims must be positive, got {self.hidden_dims}")
        if self.layers is None:
            self.layers = len(self.hidden_dims)
        elif self.layers != len(self.hidden_dims):
            raise DataError("layers must match len(hidden_dims)")
        if self.aggregator not in ("mean", "maxpool"):
            raise DataError(f"unknown aggregator {self.aggregator!r}")
        if not 0.0 <= self.dropout < 1.0:
            raise DataError("dropout must lie in [0, 1)")
        if self.lr <= 0 or self.batch_size < 1 or self.epochs < 0:
            raise DataError("lr must be > 0, batch_size >= 1, epochs >= 0")
        if not -1.0 <= self.theta < 1.0:
            raise DataError("theta must lie in [-1, 1)")
        if self.min_degree < 0:
            raise DataError("min_degree must be >= 0")
        if self.arch in GRAPH_ARCHS:
            if len(self.fan_outs) != len(self.hidden_dims):
                raise DataError("need one fan_out per graph layer")
            if any(f < 1 for f in self.fan_outs):
                raise DataError("fan_outs must be positive")


@dataclass
class TrainingReport:
    first_batch_loss: float | None = None
    epochs: list[dict] = field(default_factory=list)

    def final_val_accuracy(self) -> float | None:
        return self.epochs[-1]["val_accuracy"] if self.epochs else None


@dataclass
class SageModel:
    config: ModelConfig
    class_table: list[str]
    train_ids: list[str]
    train_features: np.ndarray  # (n, D) float64, always f32-exact
    graph: SimilarityGraph | None
    sage_layers: list[SageLayer]
    mlp: list[LayerParams]
    head: LayerParams

    def parameters(self) -> list[LayerParams]:
        out = list(self.mlp)
        for layer in self.sage_layers:
            out.extend(layer.layer_params())
        out.append(self.head)
        return out

    def zero_grads(self) -> None:
        for p in self.parameters():
            p.zero_grads()

    def pooled_logit_grad(self, features, class_index: int):
        return pooled_logit_grad(self, features, class_index)


def count_parameters(model: SageModel) -> int:
    return sum(p.param_count() for p in model.parameters())


def _f32_exact(x: np.ndarray) -> np.ndarray:
    return np.asarray(x, dtype=np.float32).astype(np.float64)


def pixel_features(image, size: int) -> np.ndarray:
    """Grayscale -> size x size bilinear downsample -> flatten -> [0, 1]."""
    gray = img_ops.channel_mean(image)
    small = img_ops.resize_bilinear(gray, size, size)
    return _f32_exact(img_ops.normalize(small.ravel()))


def model_space_features(
    config: ModelConfig,
    store: FeatureStore | None,
    manifest: DatasetManifest,
    sample_images: dict | None,
    ids: list[str],
) -> np.ndarray:
    """Node features for the given sample ids in the architecture's space."""
    if config.arch == "gnn_only":
        if sample_images is None:
            raise DataError("gnn_only needs raw images")
        rows = []
        for sid in ids:
            if sid not in sample_images:
                raise DataError(f"no image for sample {sid!r}")
            rows.append(pixel_features(sample_images[sid], config.gnn_image_size))
        return np.stack(rows) if rows else np.zeros((0, config.gnn_image_size**2))
    if store is None:
        raise DataError(f"{config.arch} needs a pooled feature store")
    return _f32_exact(store.features_f64(ids))


def build(
    config: ModelConfig,
    store: FeatureStore | None,
    manifest: DatasetManifest,
    sample_images: dict | None = None,
    graph: SimilarityGraph | None = None,
) -> SageModel:
    """Wire up an architecture over the training split of the manifest."""
    class_table = list(manifest.class_table)
    k = len(class_table)
    if k < 2:
        raise DataError("need at least 2 classes")
    train_ids = manifest.ids("train")
    if not train_ids:
        raise DataError("manifest has no training split")
    feats = model_space_features(config, store, manifest, sample_images, train_ids)
    d = feats.shape[1]
    rng = Rng(config.seed)

    mlp: list[LayerParams] = []
    sage_layers: list[SageLayer] = []
    if config.arch in ("cnn_only", "parallel"):
        mlp.append(
            init_layer("mlp0", d, config.hidden_dims[0], rng.stream("init:mlp0"),
                       config.use_bias)
        )
    if config.arch in GRAPH_ARCHS:
        width = d
        for i, hidden in enumerate(config.hidden_dims):
            sage_layers.append(
                make_sage_layer(
                    f"sage{i}", width, hidden, rng.stream(f"init:sage{i}"),
                    config.aggregator, config.l2_normalize, config.use_bias,
                )
            )
            width = hidden
        if graph is None:
            graph = build_adjacency(feats, config.theta, config.min_degree)
        elif graph.n != len(train_ids):
            raise DataError(
                f"graph has {graph.n} nodes but the training split has {len(train_ids)}"
            )
    else:
        graph = None

    if config.arch == "cnn_only":
        head_in = config.hidden_dims[0]
    elif config.arch == "parallel":
        head_in = config.hidden_dims[0] + config.hidden_dims[-1]
    else:
        head_in = config.hidden_dims[-1]
    head = init_layer("head", head_in, k, rng.stream("init:head"), config.use_bias)
    return SageModel(
        config, class_table, train_ids, feats, graph, sage_layers, mlp, head
    )


# ---------------------------------------------------------------------------
# forward / backward over layered neighborhoods


def _sage_stack_forward(model, sample, feats, train=False, rng=None):
    """Run the SAGE stack over a NeighborSample; returns (h_targets, caches).

    ``feats`` is indexed by the node ids appearing in the sample.  Output rows
    follow ``sample.targets`` order.
    """
    cfg = model.config
    k_layers = len(model.sage_layers)
    h = feats[sample.base_nodes]
    caches = []
    for ell in range(k_layers):
        li = k_layers - 1 - ell  # deepest hop feeds the first layer
        nodes = sample.levels[li]
        parent = sample.levels[li + 1]
        self_pos = np.searchsorted(parent, nodes)
        offsets, ids = sample.hops[li]
        nbr_pos = np.searchsorted(parent, ids)
        layer = model.sage_layers[ell]
        h, cache = layer.forward(h, self_pos, offsets, nbr_pos)
        h, mask = dropout(h, cfg.dropout, train, rng)
        caches.append((cache, mask))
    return h, caches


def _sage_stack_backward(model, caches, dh):
    for ell in reversed(range(len(model.sage_layers))):
        cache, mask = caches[ell]
        dh = dropout_backward(dh, mask)
        dh = model.sage_layers[ell].backward(cache, dh)
    return dh


def _mlp_forward(model, x, train=False, rng=None):
    cfg = model.config
    caches = []
    h = x
    for p in model.mlp:
        y = linear_forward(p, h)
        a = relu(y)
        out, mask = dropout(a, cfg.dropout, train, rng)
        caches.append((h, y, mask))
        h = out
    return h, caches


def _mlp_backward(model, caches, dh):
    for p, (x, y, mask) in zip(reversed(model.mlp), reversed(caches)):
        dh = dropout_backward(dh, mask)
        dh = relu_backward(y, dh)
        dh = linear_backward(p, x, dh)
    return dh


def _forward_batch(model, feats, sample, batch_feats, train=False, rng=None):
    """Logits for one batch; ``sample`` is None for cnn_only."""
    arch = model.config.arch
    caches = {}
    if arch == "cnn_only":
        h, caches["mlp"] = _mlp_forward(model, batch_feats, train, rng)
    elif arch == "parallel":
        hm, caches["mlp"] = _mlp_forward(model, batch_feats, train, rng)
        hs, caches["sage"] = _sage_stack_forward(model, sample, feats, train, rng)
        h = np.hstack([hm, hs])
    else:
        h, caches["sage"] = _sage_stack_forward(model, sample, feats, train, rng)
    caches["head_in"] = h
    return linear_forward(model.head, h), caches


def _backward_batch(model, caches, dlogits):
    """Backpropagate to the base-level node features; returns dfeats (or the
    batch-feature gradient for cnn_only)."""
    dh = linear_backward(model.head, caches["head_in"], dlogits)
    arch = model.config.arch
    if arch == "cnn_only":
        return _mlp_backward(model, caches["mlp"], dh)
    if arch == "parallel":
        m_width = model.config.hidden_dims[0]
        dmlp = _mlp_backward(model, caches["mlp"], dh[:, :m_width])
        dsage = _sage_stack_backward(model, caches["sage"], dh[:, m_width:])
        return dmlp, dsage
    return _sage_stack_backward(model, caches["sage"], dh)


# ---------------------------------------------------------------------------
# inductive attachment


def _attach_lists(model, queries: np.ndarray) -> list[np.ndarray]:
    """Per query: training-node neighbor ids under threshold + degree floor."""
    cfg = model.config
    train = model.train_features
    n = train.shape[0]
    tnorm = np.linalg.norm(train, axis=1)
    qnorm = np.linalg.norm(queries, axis=1)
    denom = np.outer(qnorm, tnorm)
    with np.errstate(invalid="ignore", divide="ignore"):
        sims_all = np.where(denom > 0.0, (queries @ train.T) / denom, 0.0)
    np.clip(sims_all, -1.0, 1.0, out=sims_all)
    cap = min(cfg.min_degree, n)
    out = []
    for i in range(len(queries)):
        sims = sims_all[i]
        nbrs = set(np.nonzero(sims > cfg.theta)[0].tolist()) if qnorm[i] > 0.0 else set()
        if len(nbrs) < cap:
            order = np.lexsort((np.arange(n), -sims))
            nbrs.update(int(j) for j in order[:cap])
        out.append(np.fromiter(sorted(nbrs), dtype=np.int64, count=len(nbrs)))
    return out


def _union_graph(model, nbr_lists):
    """Disjoint union of one augmented copy of the training graph per query.

    Block b holds train node v at id b*(n+1)+v and its query at b*(n+1)+n,
    with symmetric query edges appended (the query id sorts last, so neighbor
    lists stay sorted).  Returns (graph, query_ids)."""
    g = model.graph
    n = g.n
    node_range = np.arange(n + 1, dtype=np.int64)
    all_offsets = [np.zeros(1, dtype=np.int64)]
    nbr_chunks = []
    query_ids = []
    total = 0
    base_positions = np.arange(len(g.neighbors), dtype=np.int64)
    for b, qn in enumerate(nbr_lists):
        shift = b * (n + 1)
        if len(qn):
            # every attached train node's slice grows by one (the query);
            # manual scatter, np.insert is too slow on this path
            ins_pos = g.offsets[qn + 1]
            inserted = np.full(len(g.neighbors) + len(qn), n, dtype=np.int64)
            dest = base_positions + np.searchsorted(ins_pos, base_positions, "right")
            inserted[dest] = g.neighbors
            train_bounds = g.offsets[1:] + np.searchsorted(qn, node_range[1:])
        else:
            inserted = g.neighbors
            train_bounds = np.asarray(g.offsets[1:])
        block_nbrs = np.concatenate([inserted, qn]) + shift
        bounds = np.concatenate([train_bounds, [train_bounds[-1] + len(qn)]])
        all_offsets.append(total + bounds)
        total += int(bounds[-1])
        nbr_chunks.append(block_nbrs)
        query_ids.append(shift + n)
    big_offsets = np.concatenate(all_offsets)
    big_nbrs = (
        np.concatenate(nbr_chunks) if nbr_chunks else np.zeros(0, dtype=np.int64)
    )
    union = SimilarityGraph(
        len(nbr_lists) * (n + 1), model.config.theta, big_offsets, big_nbrs
    )
    return union, np.array(query_ids, dtype=np.int64)


def _find_duplicates(model, queries) -> np.ndarray:
    """Index of the first bit-identical training row per query, or -1.

    Training features are immutable after build, so the byte-level row index
    is cached on the model instance."""
    index = getattr(model, "_dup_index", None)
    if index is None:
        index = {}
        for i in range(model.train_features.shape[0] - 1, -1, -1):
            index[model.train_features[i].tobytes()] = i
        model._dup_index = index
    return np.array(
        [index.get(np.ascontiguousarray(q).tobytes(), -1) for q in queries],
        dtype=np.int64,
    )


def transductive_logits(model, caches_out: dict | None = None) -> np.ndarray:
    """Eval-mode logits for every training node on the training graph."""
    targets = np.arange(model.graph.n, dtype=np.int64)
    sample = full_neighbor_sample(model.graph, targets, len(model.sage_layers))
    logits, caches = _forward_batch(model, model.train_features, sample,
                                    model.train_features, train=False)
    if caches_out is not None:
        caches_out["sample"] = sample
        caches_out["caches"] = caches
    return logits


def predict(
    model: SageModel, features: np.ndarray, chunk: int = 32, with_neighbors=False
):
    """Class probabilities for query feature rows (inductive attachment).

    Rows bit-identical to a training row reuse that node's transductive
    output.  With ``with_neighbors`` also returns the attachment lists as
    (train_row_index, similarity) pairs per query.
    """
    q = np.asarray(features, dtype=np.float64)
    if q.ndim == 1:
        q = q[None, :]
    d = model.train_features.shape[1]
    if q.shape[1] != d:
        raise ShapeError(f"query dim {q.shape[1]} != model feature dim {d}")
    m = q.shape[0]
    k = len(model.class_table)
    logits = np.zeros((m, k))
    neighbor_info: list[list[tuple[int, float]]] = [[] for _ in range(m)]

    if model.config.arch == "cnn_only":
        h, _ = _mlp_forward(model, q, train=False)
        logits = linear_forward(model.head, h)
        probs = softmax(logits)
        return (probs, neighbor_info) if with_neighbors else probs

    dup = _find_duplicates(model, q)
    dup_rows = np.nonzero(dup >= 0)[0]
    new_rows = np.nonzero(dup < 0)[0]

    if dup_rows.size:
        trans = transductive_logits(model)
        logits[dup_rows] = trans[dup[dup_rows]]
        if with_neighbors:
            for i in dup_rows:
                t = int(dup[i])
                for nb in model.graph.neighbor_list(t):
                    sim = _safe_cosine(model.train_features[t], model.train_features[nb])
                    neighbor_info[i].append((int(nb), sim))

    for s in range(0, len(new_rows), chunk):
        rows = new_rows[s : s + chunk]
        if not rows.size:
            continue
        nbr_lists = _attach_lists(model, q[rows])
        union, query_ids = _union_graph(model, nbr_lists)
        n1 = model.graph.n + 1
        feats = np.empty((len(rows), n1, d))
        feats[:, : model.graph.n] = model.train_features
        feats[:, model.graph.n] = q[rows]
        feats = feats.reshape(union.n, d)
        sample = full_neighbor_sample(union, query_ids, len(model.sage_layers))
        batch_feats = q[rows]
        chunk_logits, _ = _forward_batch(model, feats, sample, batch_feats, train=False)
        logits[rows] = chunk_logits
        if with_neighbors:
            for b, r in enumerate(rows):
                for nb in nbr_lists[b]:
                    sim = _safe_cosine(q[r], model.train_features[nb])
                    neighbor_info[r].append((int(nb), sim))

    probs = softmax(logits)
    return (probs, neighbor_info) if with_neighbors else probs


def _safe_cosine(a, b) -> float:
    na, nb_ = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb_ == 0.0:
        return 0.0
    return float(np.clip(float(a @ b) / (na * nb_), -1.0, 1.0))


def pooled_logit_grad(model: SageModel, features: np.ndarray, class_index: int):
    """Class logit and its gradient with respect to the query feature vector.

    Follows every differentiable path: the query's own stack and, for graph
    architectures, its contribution to the aggregates of attached neighbors.
    """
    if not 0 <= class_index < len(model.class_table):
        raise DataError(f"class index {class_index} out of range")
    q = np.asarray(features, dtype=np.float64).ravel()
    d = model.train_features.shape[1]
    if q.shape[0] != d:
        raise ShapeError(f"query dim {q.shape[0]} != model feature dim {d}")

    if model.config.arch == "cnn_only":
        model.zero_grads()
        h, caches = _mlp_forward(model, q[None, :], train=False)
        logits = linear_forward(model.head, h)
        dlogits = np.zeros_like(logits)
        dlogits[0, class_index] = 1.0
        dh = linear_backward(model.head, h, dlogits)
        grad = _mlp_backward(model, caches, dh)[0]
        model.zero_grads()
        return float(logits[0, class_index]), grad

    dup = _find_duplicates(model, q[None, :])[0]
    model.zero_grads()
    if dup >= 0:
        out: dict = {}
        logits = transductive_logits(model, out)
        dlogits = np.zeros_like(logits)
        dlogits[int(dup), class_index] = 1.0
        score = float(logits[int(dup), class_index])
        base = out["sample"].base_nodes
        pos = int(np.searchsorted(base, dup))
        grad = _collect_base_grad(model, out["caches"], dlogits, base, pos,
                                  query_batch_row=int(dup))
    else:
        nbr_lists = _attach_lists(model, q[None, :])
        union, query_ids = _union_graph(model, nbr_lists)
        n1 = model.graph.n + 1
        feats = np.zeros((union.n, d))
        feats[: model.graph.n] = model.train_features
        feats[model.graph.n] = q
        sample = full_neighbor_sample(union, query_ids, len(model.sage_layers))
        logits, caches = _forward_batch(model, feats, sample, q[None, :], train=False)
        score = float(logits[0, class_index])
        dlogits = np.zeros_like(logits)
        dlogits[0, class_index] = 1.0
        base = sample.base_nodes
        pos = int(np.searchsorted(base, query_ids[0]))
        grad = _collect_base_grad(model, caches, dlogits, base, pos, query_batch_row=0)
    model.zero_grads()
    return score, grad


def _collect_base_grad(model, caches, dlogits, base, pos, query_batch_row):
    """Gradient w.r.t. the query node's base-level feature row."""
    back = _backward_batch(model, caches, dlogits)
    if model.config.arch == "parallel":
        dmlp, dsage = back
        return dmlp[query_batch_row] + dsage[pos]
    return back[pos]


# ---------------------------------------------------------------------------
# training


def train(
    model: SageModel,
    store: FeatureStore | None,
    manifest: DatasetManifest,
    sample_images: dict | None = None,
    rng: Rng | None = None,
) -> TrainingReport:
    """Paper-style loop: shuffled mini-batches, softmax cross-entropy, Adam,
    per-epoch validation accuracy with dropout disabled."""
    cfg = model.config
    rng = rng or Rng(cfg.seed)
    train_rng = rng.stream("train")
    train_ids = manifest.ids("train")
    if train_ids != model.train_ids:
        raise DataError("manifest training split no longer matches the model")
    labels = one_hot(manifest)
    id_to_row = {e.sample_id: i for i, e in enumerate(manifest.entries)}
    y = labels[[id_to_row[s] for s in train_ids]]
    feats = model.train_features
    n = len(train_ids)

    val_ids = manifest.ids("val")
    val_feats = None
    val_truth = None
    if val_ids:
        val_feats = model_space_features(cfg, store, manifest, sample_images, val_ids)
        pos = {c: i for i, c in enumerate(model.class_table)}
        val_truth = np.array(
            [pos[e.label] for e in manifest.entries if e.split == "val"],
            dtype=np.int64,
        )

    state = AdamState(lr=cfg.lr)
    report = TrainingReport()
    for epoch in range(cfg.epochs):
        order = train_rng.permutation(n)
        losses = []
        for bi, start in enumerate(range(0, n, cfg.batch_size)):
            batch = order[start : start + cfg.batch_size]
            sample = None
            if cfg.arch in GRAPH_ARCHS:
                sample = sample_neighbors(model.graph, batch, cfg.fan_outs, train_rng)
            logits, caches = _forward_batch(
                model, feats, sample, feats[batch], train=True, rng=train_rng
            )
            loss, _probs, dlogits = softmax_cross_entropy(logits, y[batch])
            if not np.isfinite(loss):
                raise DivergenceError(
                    f"non-finite loss at epoch {epoch} batch {bi}", epoch, bi
                )
            if report.first_batch_loss is None:
                report.first_batch_loss = loss
            losses.append(loss)
            model.zero_grads()
            _backward_batch(model, caches, dlogits)
            adam_step(model.parameters(), state)
        val_acc = None
        if val_feats is not None and len(val_feats):
            probs = predict(model, val_feats)
            val_acc = float((probs.argmax(axis=1) == val_truth).mean())
        report.epochs.append({"loss": float(np.mean(losses)), "val_accuracy": val_acc})
    return report


def evaluate(
    model: SageModel,
    store: FeatureStore | None,
    manifest: DatasetManifest,
    split_name: str = "test",
    sample_images: dict | None = None,
):
    """(metrics dict, confusion matrix) on one split, weighted averaging."""
    from .metrics import confusion, metrics as compute_metrics

    ids = manifest.ids(split_name)
    if not ids:
        raise DataError(f"split {split_name!r} is empty")
    feats = model_space_features(model.config, store, manifest, sample_images, ids)
    pos = {c: i for i, c in enumerate(model.class_table)}
    truth = np.array(
        [pos[e.label] for e in manifest.entries if e.split == split_name],
        dtype=np.int64,
    )
    probs = predict(model, feats)
    cm = confusion(probs.argmax(axis=1), truth, len(model.class_table))
    return compute_metrics(cm), cm


def ablate(
    store: FeatureStore | None,
    manifest: DatasetManifest,
    base_config: ModelConfig,
    sample_images: dict | None = None,
    archs: list[str] | None = None,
) -> list[dict]:
    """Train every architecture under the same seed/budget; returns one
    metrics row per arch in fixed order."""
    chosen = [a for a in ARCHS if archs is None or a in archs]
    if not chosen:
        raise DataError("no architectures selected")
    rows = []
    for arch in chosen:
        cfg = replace(base_config, arch=arch)
        model = build(cfg, store, manifest, sample_images)
        train(model, store, manifest, sample_images)
        report, _cm = evaluate(model, store, manifest, "test", sample_images)
        rows.append(
            {
                "arch": arch,
                "accuracy": report["accuracy"],
                "precision": report["precision"],
                "recall": report["recall"],
                "f1": report["f1"],
            }
        )
    return rows


# ---------------------------------------------------------------------------
# checkpoints


def _tensor_directory(model: SageModel) -> list[tuple[str, np.ndarray]]:
    tensors = []
    for p in model.parameters():
        tensors.append((f"{p.name}/w", p.weight))
        if p.bias is not None:
            tensors.append((f"{p.name}/b", p.bias))
    tensors.append(("train_features", model.train_features))
    return tensors


def save_model(model: SageModel, path) -> None:
    tensors = _tensor_directory(model)
    directory = {}
    offset = 0
    blobs = []
    for name, arr in tensors:
        raw = np.ascontiguousarray(arr, dtype="<f4").tobytes()
        directory[name] = {
            "shape": list(arr.shape),
            "offset": offset,
            "nbytes": len(raw),
        }
        blobs.append(raw)
        offset += len(raw)
    header = {
        "arch": model.config.arch,
        "config": asdict(model.config),
        "class_table": model.class_table,
        "train_ids": model.train_ids,
        "tensors": directory,
    }
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    with open(path, "wb") as fh:
        fh.write(LGCK_MAGIC)
        fh.write(struct.pack("<II", LGCK_VERSION, len(header_bytes)))
        fh.write(header_bytes)
        for raw in blobs:
            fh.write(raw)


def load_model(path, graph: SimilarityGraph | None = None) -> SageModel:
    data = Path(path).read_bytes()
    if data[:4] != LGCK_MAGIC:
        raise FormatError(f"bad magic {data[:4]!r}, expected {LGCK_MAGIC!r}")
    if len(data) < 12:
        raise FormatError("truncated checkpoint header")
    version, header_len = struct.unpack_from("<II", data, 4)
    if version != LGCK_VERSION:
        raise FormatError(f"unsupported version {version}")
    try:
        header = json.loads(data[12 : 12 + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"bad checkpoint header: {exc}") from exc
    payload_start = 12 + header_len
    directory = header["tensors"]

    def tensor(name):
        meta = directory[name]
        lo = payload_start + meta["offset"]
        hi = lo + meta["nbytes"]
        if hi > len(data):
            raise FormatError(f"tensor {name} overruns the file")
        arr = np.frombuffer(data[lo:hi], dtype="<f4").astype(np.float64)
        return arr.reshape(meta["shape"])

    cfg_dict = dict(header["config"])
    cfg_dict["hidden_dims"] = tuple(cfg_dict["hidden_dims"])
    cfg_dict["fan_outs"] = tuple(cfg_dict["fan_outs"])
    config = ModelConfig(**cfg_dict)
    train_features = tensor("train_features")

    if config.arch in GRAPH_ARCHS and graph is None:
        graph = build_adjacency(train_features, config.theta, config.min_degree)

    # rebuild the layer structure, then overwrite the initialized tensors
    class_table = header["class_table"]
    model = SageModel(
        config=config,
        class_table=class_table,
        train_ids=header["train_ids"],
        train_features=train_features,
        graph=graph if config.arch in GRAPH_ARCHS else None,
        sage_layers=[],
        mlp=[],
        head=None,  # type: ignore[arg-type]
    )
    rng = Rng(config.seed)
    d = train_features.shape[1]
    if config.arch in ("cnn_only", "parallel"):
        model.mlp.append(
            init_layer("mlp0", d, config.hidden_dims[0], rng.stream("init:mlp0"),
                       config.use_bias)
        )
    if config.arch in GRAPH_ARCHS:
        width = d
        for i, hidden in enumerate(config.hidden_dims):
            model.sage_layers.append(
                make_sage_layer(
                    f"sage{i}", width, hidden, rng.stream(f"init:sage{i}"),
                    config.aggregator, config.l2_normalize, config.use_bias,
                )
            )
            width = hidden
    if config.arch == "cnn_only":
        head_in = config.hidden_dims[0]
    elif config.arch == "parallel":
        head_in = config.hidden_dims[0] + config.hidden_dims[-1]
    else:
        head_in = config.hidden_dims[-1]
    model.head = init_layer("head", head_in, len(class_table),
                            rng.stream("init:head"), config.use_bias)
    for p in model.parameters():
        p.weight[:] = tensor(f"{p.name}/w")
        if p.bias is not None:
            p.bias[:] = tensor(f"{p.name}/b")
    return model
