"""Dataset manifests, feature stores with bit-exact binary IO, stratified
splitting, one-hot labels, and the synthetic cluster dataset.

Feature store layout (all integers little-endian):

    magic  b"LGFS"
    u32    version (= 1)
    u8     kind (0 = pooled, 1 = spatial)
    u8     rank (number of per-sample dimensions)
    u16    reserved (= 0)
    u32    n (sample count)
    u32[rank]  dims
    f32[n * prod(dims)]  payload, row-major per sample
    u64    footer: payload byte count

The sample-id index ships as a sibling CSV ``<store>.ids.csv`` with header
``sample_id,row``.
"""

from __future__ import annotations

import csv
import io
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError, FormatError
from .rng import Rng

LGFS_MAGIC = b"LGFS"
LGFS_VERSION = 1
SPLITS = ("train", "val", "test")


@dataclass
class ManifestEntry:
    sample_id: str
    label: str
    split: str | None = None


@dataclass
class DatasetManifest:
    entries: list[ManifestEntry]
    class_table: list[str] = field(default_factory=list)

    def __post_init__(self):
        if not self.class_table:
            seen = []
            for e in self.entries:
                if e.label not in seen:
                    seen.append(e.label)
            self.class_table = seen
        ids = [e.sample_id for e in self.entries]
        if len(set(ids)) != len(ids):
            raise DataError("duplicate sample ids in manifest")
        known = set(self.class_table)
        for e in self.entries:
            if e.label not in known:
                raise DataError(f"label {e.label!r} missing from class table")
            if e.split is not None and e.split not in SPLITS:
                raise DataError(f"bad split {e.split!r} for {e.sample_id}")

    def ids(self, split: str | None = None) -> list[str]:
        return [e.sample_id for e in self.entries if split is None or e.split == split]

    def labels(self, split: str | None = None) -> list[str]:
        return [e.label for e in self.entries if split is None or e.split == split]

    def label_indices(self, split: str | None = None) -> np.ndarray:
        pos = {c: i for i, c in enumerate(self.class_table)}
        return np.array(
            [pos[e.label] for e in self.entries if split is None or e.split == split],
            dtype=np.int64,
        )

    def write_csv(self, path) -> None:
        with open(path, "w", newline="\n", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["sample_id", "label", "split"])
            for e in self.entries:
                w.writerow([e.sample_id, e.label, e.split or ""])

    @classmethod
    def read_csv(cls, path) -> "DatasetManifest":
        entries = []
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != ["sample_id", "label", "split"]:
                raise FormatError(f"bad manifest header {header!r}")
            for row in reader:
                if len(row) != 3:
                    raise FormatError(f"bad manifest row {row!r}")
                entries.append(ManifestEntry(row[0], row[1], row[2] or None))
        return cls(entries)


def one_hot(manifest: DatasetManifest) -> np.ndarray:
    """(N, K) one-hot matrix in class-table column order."""
    if not manifest.class_table:
        raise DataError("empty class table")
    k = len(manifest.class_table)
    idx = manifest.label_indices()
    out = np.zeros((len(idx), k))
    out[np.arange(len(idx)), idx] = 1.0
    return out


@dataclass
class FeatureStore:
    kind: str  # "pooled" | "spatial"
    dims: tuple[int, ...]
    payload: np.ndarray  # (n, *dims) float32
    ids: list[str]

    def __post_init__(self):
        if self.kind not in ("pooled", "spatial"):
            raise DataError(f"bad store kind {self.kind!r}")
        self.dims = tuple(int(d) for d in self.dims)
        self.payload = np.asarray(self.payload, dtype=np.float32).reshape(
            (len(self.ids),) + self.dims
        )
        self._index = {sid: i for i, sid in enumerate(self.ids)}
        if len(self._index) != len(self.ids):
            raise DataError("duplicate sample ids in feature store")

    @property
    def n(self) -> int:
        return len(self.ids)

    def row(self, sample_id: str) -> np.ndarray:
        try:
            return self.payload[self._index[sample_id]]
        except KeyError:
            raise DataError(f"unknown sample id {sample_id!r}") from None

    def rows(self, sample_ids) -> np.ndarray:
        idx = [self._index[s] for s in sample_ids]
        return self.payload[idx]

    def pooled_view(self) -> np.ndarray:
        """(n, C) float64 pooled vectors; spatial stores average over space."""
        if self.kind == "pooled":
            return self.payload.astype(np.float64).reshape(self.n, -1)
        return self.payload.astype(np.float64).mean(axis=(1, 2))

    def features_f64(self, sample_ids=None) -> np.ndarray:
        flat = self.pooled_view()
        if sample_ids is None:
            return flat
        idx = [self._index[s] for s in sample_ids]
        return flat[idx]


def write_feature_store(store: FeatureStore, path) -> None:
    path = Path(path)
    payload = np.ascontiguousarray(store.payload, dtype="<f4")
    kind_code = 0 if store.kind == "pooled" else 1
    rank = len(store.dims)
    buf = io.BytesIO()
    buf.write(LGFS_MAGIC)
    buf.write(struct.pack("<IBBHI", LGFS_VERSION, kind_code, rank, 0, store.n))
    buf.write(struct.pack(f"<{rank}I", *store.dims))
    raw = payload.tobytes()
    buf.write(raw)
    buf.write(struct.pack("<Q", len(raw)))
    path.write_bytes(buf.getvalue())
    with open(id_index_path(path), "w", newline="\n", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sample_id", "row"])
        for i, sid in enumerate(store.ids):
            w.writerow([sid, i])


def id_index_path(store_path) -> Path:
    return Path(str(store_path) + ".ids.csv")


def read_feature_store(path) -> FeatureStore:
    path = Path(path)
    data = path.read_bytes()
    if data[:4] != LGFS_MAGIC:
        raise FormatError(f"bad magic {data[:4]!r}, expected {LGFS_MAGIC!r}")
    if len(data) < 16:
        raise FormatError(f"truncated header: {len(data)} bytes")
    version, kind_code, rank, reserved, n = struct.unpack_from("<IBBHI", data, 4)
    if version != LGFS_VERSION:
        raise FormatError(f"unsupported version {version}")
    if kind_code not in (0, 1):
        raise FormatError(f"bad kind code {kind_code}")
    if reserved != 0:
        raise FormatError(f"reserved field must be 0, got {reserved}")
    off = 16
    if len(data) < off + 4 * rank:
        raise FormatError("truncated dims block")
    dims = struct.unpack_from(f"<{rank}I", data, off)
    off += 4 * rank
    count = n * int(np.prod(dims)) if rank else n
    expected = count * 4
    actual = len(data) - off - 8
    if actual != expected:
        raise FormatError(
            f"payload length mismatch: expected {expected} bytes, got {actual}"
        )
    payload = np.frombuffer(data, dtype="<f4", count=count, offset=off)
    off += expected
    (footer,) = struct.unpack_from("<Q", data, off)
    if footer != expected:
        raise FormatError(f"footer byte count {footer} != payload bytes {expected}")

    idx_path = id_index_path(path)
    ids: list[str] = []
    with open(idx_path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["sample_id", "row"]:
            raise FormatError(f"bad id index header {header!r}")
        for row_num, row in enumerate(reader):
            if len(row) != 2 or int(row[1]) != row_num:
                raise FormatError(f"bad id index row {row!r}")
            ids.append(row[0])
    if len(ids) != n:
        raise FormatError(f"id index has {len(ids)} rows, store has {n}")
    kind = "pooled" if kind_code == 0 else "spatial"
    return FeatureStore(kind, dims, payload.reshape((n,) + tuple(dims)).copy(), ids)


def split(
    manifest: DatasetManifest,
    fractions: tuple[float, float, float] = (0.8, 0.1, 0.1),
    rng: Rng | None = None,
) -> DatasetManifest:
    """Assign stratified train/val/test splits.

    Within each class the ids are shuffled deterministically and cut by the
    fractions: counts are rounded down, then the leftover samples go to the
    splits with the largest fractional parts (train wins ties), which keeps
    every split within one sample of its per-class target.
    """
    if not manifest.entries:
        raise DataError("cannot split an empty manifest")
    if any(f <= 0 for f in fractions) or abs(sum(fractions) - 1.0) > 1e-9:
        raise DataError(f"fractions must be positive and sum to 1, got {fractions}")
    rng = rng or Rng(0)
    assignment: dict[str, str] = {}
    for label in manifest.class_table:
        ids = [e.sample_id for e in manifest.entries if e.label == label]
        order = np.array(ids, dtype=object)
        rng.shuffle(order)
        n = len(order)
        counts = [int(n * f) for f in fractions]
        leftover = n - sum(counts)
        by_remainder = sorted(
            range(3), key=lambda j: (-(n * fractions[j] - counts[j]), j)
        )
        for j in by_remainder[:leftover]:
            counts[j] += 1
        bounds = np.cumsum(counts)
        for i, sid in enumerate(order):
            if i < bounds[0]:
                assignment[sid] = "train"
            elif i < bounds[1]:
                assignment[sid] = "val"
            else:
                assignment[sid] = "test"
    entries = [
        ManifestEntry(e.sample_id, e.label, assignment[e.sample_id])
        for e in manifest.entries
    ]
    return DatasetManifest(entries, list(manifest.class_table))


def _draw_centroids(k: int, dim: int, rng: Rng, max_tries: int = 10_000) -> np.ndarray:
    cents: list[np.ndarray] = []
    tries = 0
    while len(cents) < k:
        if tries >= max_tries:
            raise DataError(
                f"could not place {k} centroids with pairwise cosine <= 0.5 in "
                f"{max_tries} tries; lower k or raise dim"
            )
        tries += 1
        c = rng.normal(dim)
        norm = np.linalg.norm(c)
        if norm == 0.0:
            continue
        c = c / norm
        if all(float(c @ o) <= 0.5 for o in cents):
            cents.append(c)
    return np.stack(cents)


def synth_dataset(
    k_classes: int,
    n_per_class: int,
    dim: int,
    noise_sigma: float,
    rng: Rng,
    centroids: np.ndarray | None = None,
    make_images: bool = False,
    image_size: int = 32,
    image_noise: float = 0.3,
) -> tuple[DatasetManifest, FeatureStore, dict[str, np.ndarray] | None]:
    """Gaussian clusters around rejection-sampled unit centroids.

    ``centroids`` overrides the sampling (test hook).  With ``make_images``
    a degraded grayscale rendering of each sample is produced as well: the
    feature vector goes through a fixed random projection to image_size^2
    pixels, gets additive noise of ``image_noise`` times its std, and is
    min-max quantized to 8 bits.  Those stand in for raw images wherever a
    pixel-only model needs desk-scale input.
    """
    if k_classes < 2 or n_per_class < 4 or dim < 2 or noise_sigma <= 0:
        raise DataError("need k >= 2, n_per_class >= 4, dim >= 2, sigma > 0")
    if centroids is None:
        centroids = _draw_centroids(k_classes, dim, rng.stream("centroids"))
    else:
        centroids = np.asarray(centroids, dtype=np.float64)
        if centroids.shape != (k_classes, dim):
            raise DataError(f"centroid override shape {centroids.shape} mismatch")

    sample_rng = rng.stream("samples")
    n_total = k_classes * n_per_class
    feats = np.zeros((n_total, dim))
    entries = []
    for c in range(k_classes):
        noise = sample_rng.normal(n_per_class * dim).reshape(n_per_class, dim)
        feats[c * n_per_class : (c + 1) * n_per_class] = (
            centroids[c] + noise_sigma * noise
        )
        for i in range(n_per_class):
            entries.append(ManifestEntry(f"s{c * n_per_class + i:05d}", f"class_{c}"))
    manifest = DatasetManifest(entries)
    store = FeatureStore("pooled", (dim,), feats.astype(np.float32), manifest.ids())

    images = None
    if make_images:
        img_rng = rng.stream("images")
        npix = image_size * image_size
        proj = img_rng.normal(npix * dim).reshape(npix, dim) / np.sqrt(dim)
        images = {}
        for e, f in zip(manifest.entries, feats):
            v = proj @ f
            v = v + image_noise * float(v.std()) * img_rng.normal(npix)
            lo, hi = v.min(), v.max()
            scaled = (v - lo) / (hi - lo) if hi > lo else np.zeros_like(v)
            images[e.sample_id] = (
                np.round(scaled * 255.0).astype(np.uint8).reshape(image_size, image_size)
            )
    return manifest, store, images
