"""Similarity-graph construction, normalization, and neighbor sampling.

Graphs store symmetric adjacency without self-loops in CSR form.  Edges come
from thresholded cosine similarity (strict ``S > theta``); nodes left under a
degree floor get edges to their most-similar peers, then the edge set is
symmetrized.  Graph cache files (little-endian):

    magic b"LGGR" | u32 version=1 | u32 n | f32 theta | u32 edge_count
    | u32 offsets[n + 1] | u32 neighbors[edge_count]
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels
from .errors import DataError, DegenerateInputError, FormatError
from .rng import Rng

LGGR_MAGIC = b"LGGR"
LGGR_VERSION = 1


def cosine_similarity(f_i: np.ndarray, f_j: np.ndarray) -> float:
    """Cosine of two vectors, clamped to [-1, 1]."""
    a = np.asarray(f_i, dtype=np.float64).ravel()
    b = np.asarray(f_j, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise DataError(f"vector shapes differ: {a.shape} vs {b.shape}")
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise DegenerateInputError("cosine similarity of a zero vector is undefined")
    return float(np.clip(float(a @ b) / (na * nb), -1.0, 1.0))


@dataclass
class SimilarityGraph:
    n: int
    theta: float
    offsets: np.ndarray  # int64, length n + 1
    neighbors: np.ndarray  # int64, sorted within each node's slice
    norm_mode: str = "sym"

    def __post_init__(self):
        self.offsets = np.asarray(self.offsets, dtype=np.int64)
        self.neighbors = np.asarray(self.neighbors, dtype=np.int64)
        if len(self.offsets) != self.n + 1 or self.offsets[0] != 0:
            raise DataError("bad CSR offsets")
        if np.any(np.diff(self.offsets) < 0):
            raise DataError("CSR offsets must be non-decreasing")
        if self.offsets[-1] != len(self.neighbors):
            raise DataError("CSR offsets inconsistent with neighbor count")

    @property
    def degree(self) -> np.ndarray:
        return np.diff(self.offsets)

    @property
    def edge_count(self) -> int:
        return int(self.offsets[-1])

    def neighbor_list(self, node: int) -> np.ndarray:
        if not 0 <= node < self.n:
            raise DataError(f"unknown node id {node}")
        return self.neighbors[self.offsets[node] : self.offsets[node + 1]]

    def gather(self, nodes: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """CSR slices for many nodes at once: (offsets, concatenated ids)."""
        nodes = np.asarray(nodes, dtype=np.int64)
        lengths = self.degree[nodes]
        out_offsets = np.zeros(len(nodes) + 1, dtype=np.int64)
        np.cumsum(lengths, out=out_offsets[1:])
        total = int(out_offsets[-1])
        if total == 0:
            return out_offsets, np.zeros(0, dtype=np.int64)
        starts = self.offsets[nodes]
        pos = np.arange(total, dtype=np.int64) - np.repeat(out_offsets[:-1], lengths)
        ids = self.neighbors[np.repeat(starts, lengths) + pos]
        return out_offsets, ids

    @classmethod
    def from_neighbor_sets(cls, n, sets, theta=0.0) -> "SimilarityGraph":
        offsets = np.zeros(n + 1, dtype=np.int64)
        chunks = []
        for v in range(n):
            nbrs = np.array(sorted(sets[v]), dtype=np.int64)
            offsets[v + 1] = offsets[v] + len(nbrs)
            chunks.append(nbrs)
        nbr = np.concatenate(chunks) if chunks else np.zeros(0, dtype=np.int64)
        return cls(n, theta, offsets, nbr)


def build_adjacency(
    features, theta: float, min_degree: int = 3
) -> SimilarityGraph:
    """Thresholded cosine-similarity graph with a degree floor.

    ``features`` is an (n, D) array or anything with ``pooled_view()``.  An
    edge (i, j), i != j, exists iff S_ij > theta; afterwards every node with
    fewer than ``min_degree`` neighbors gets edges to its ``min_degree``
    most-similar peers (ties to the lower index) and the result is
    symmetrized.  Zero-feature rows take part only in the fallback.
    """
    if hasattr(features, "pooled_view"):
        features = features.pooled_view()
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise DataError(f"need a non-empty (n, D) feature matrix, got {x.shape}")
    if not -1.0 <= theta < 1.0:
        raise DataError(f"theta must lie in [-1, 1), got {theta}")
    if min_degree < 0:
        raise DataError("min_degree must be >= 0")
    n = x.shape[0]
    s = kernels.pairwise_cosine(x)
    nonzero = np.linalg.norm(x, axis=1) > 0.0

    adj = s > theta
    np.fill_diagonal(adj, False)
    adj &= nonzero[:, None] & nonzero[None, :]

    if min_degree > 0 and n > 1:
        cap = min(min_degree, n - 1)
        extra_rows = np.nonzero(adj.sum(axis=1) < cap)[0]
        for i in extra_rows:
            row = s[i].copy()
            row[i] = -np.inf
            order = np.lexsort((np.arange(n), -row))  # by similarity, then index
            for j in order[:cap]:
                adj[i, j] = True
                adj[j, i] = True

    adj |= adj.T  # symmetry also for the threshold stage
    degs = adj.sum(axis=1)
    offsets = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(degs, out=offsets[1:])
    neighbors = np.nonzero(adj)[1].astype(np.int64)
    return SimilarityGraph(n, float(theta), offsets, neighbors)


def normalize_adjacency(g: SimilarityGraph, cap: int = 4096) -> np.ndarray:
    """Dense sym-normalized adjacency with self-loops:
    D^{-1/2} (A + I) D^{-1/2}."""
    if g.n > cap:
        raise DataError(
            f"{g.n} nodes exceeds the dense cap {cap}; use the sampled path"
        )
    a = np.zeros((g.n, g.n))
    for v in range(g.n):
        a[v, g.neighbor_list(v)] = 1.0
    a += np.eye(g.n)
    deg = a.sum(axis=1)
    return a / np.sqrt(np.outer(deg, deg))


@dataclass
class NeighborSample:
    """Layered neighborhoods for a set of target nodes.

    ``levels[0]`` is the targets; ``levels[i + 1]`` is the sorted union of
    ``levels[i]`` with everything sampled for it, so every node's own
    representation stays available one level deeper.  ``hops[i]`` holds the
    sampled lists (CSR offsets + node ids) aligned with ``levels[i]``.
    """

    targets: np.ndarray
    levels: list[np.ndarray]
    hops: list[tuple[np.ndarray, np.ndarray]]
    rng_stream: str = ""

    @property
    def base_nodes(self) -> np.ndarray:
        return self.levels[-1]


def _sample_level(g, nodes, fan_out, rng):
    offsets = np.zeros(len(nodes) + 1, dtype=np.int64)
    chunks = []
    for i, v in enumerate(nodes):
        nbrs = g.neighbor_list(int(v))
        take = rng.choice_without_replacement(nbrs, fan_out) if len(nbrs) else nbrs
        take = np.sort(take)
        offsets[i + 1] = offsets[i] + len(take)
        chunks.append(take)
    ids = np.concatenate(chunks) if chunks else np.zeros(0, dtype=np.int64)
    return offsets, ids.astype(np.int64)


def sample_neighbors(
    g: SimilarityGraph, targets, fan_outs, rng: Rng, stream: str = ""
) -> NeighborSample:
    """Uniform-without-replacement fan-out sampling, one hop per entry of
    ``fan_outs`` (hop 1 covers the targets themselves)."""
    targets = np.asarray(targets, dtype=np.int64)
    if len(fan_outs) == 0 or any(f < 1 for f in fan_outs):
        raise DataError("fan_outs must be non-empty and positive")
    if targets.size and (targets.min() < 0 or targets.max() >= g.n):
        raise DataError("target node id out of range")
    levels = [targets]
    hops = []
    for fan in fan_outs:
        nodes = levels[-1]
        offsets, ids = _sample_level(g, nodes, int(fan), rng)
        hops.append((offsets, ids))
        levels.append(np.unique(np.concatenate([nodes, ids])))
    return NeighborSample(targets, levels, hops, stream)


def full_neighbor_sample(g: SimilarityGraph, targets, k_layers: int) -> NeighborSample:
    """Deterministic sample containing every neighbor (inference path)."""
    targets = np.asarray(targets, dtype=np.int64)
    levels = [targets]
    hops = []
    for _ in range(k_layers):
        nodes = levels[-1]
        offsets, ids = g.gather(nodes)
        hops.append((offsets, ids))
        levels.append(np.unique(np.concatenate([nodes, ids])))
    return NeighborSample(targets, levels, hops, "full")


def write_graph(g: SimilarityGraph, path) -> None:
    buf = bytearray()
    buf += LGGR_MAGIC
    buf += struct.pack("<IIfI", LGGR_VERSION, g.n, g.theta, g.edge_count)
    buf += g.offsets.astype("<u4").tobytes()
    buf += g.neighbors.astype("<u4").tobytes()
    Path(path).write_bytes(bytes(buf))


def read_graph(path) -> SimilarityGraph:
    data = Path(path).read_bytes()
    if data[:4] != LGGR_MAGIC:
        raise FormatError(f"bad magic {data[:4]!r}, expected {LGGR_MAGIC!r}")
    if len(data) < 20:
        raise FormatError("truncated graph header")
    version, n, theta, edge_count = struct.unpack_from("<IIfI", data, 4)
    if version != LGGR_VERSION:
        raise FormatError(f"unsupported version {version}")
    off = 20
    need = 4 * (n + 1) + 4 * edge_count
    if len(data) - off != need:
        raise FormatError(
            f"graph body length mismatch: expected {need} bytes, got {len(data) - off}"
        )
    offsets = np.frombuffer(data, dtype="<u4", count=n + 1, offset=off).astype(np.int64)
    off += 4 * (n + 1)
    neighbors = np.frombuffer(data, dtype="<u4", count=edge_count, offset=off).astype(
        np.int64
    )
    return SimilarityGraph(n, float(theta), offsets, neighbors)
