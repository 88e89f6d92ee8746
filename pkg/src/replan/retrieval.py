"""Retrieve latent state embeddings by matching failed interactions.

The table stores one projected embedding per dataset video plus one
canonical state embedding per object (the first successful entry of that
object in manifest order).  A query video is scored against every entry
by negative distance; a softmax at temperature tau turns the scores into
a categorical the retrieval samples from, returning the canonical
embedding of the sampled entry's object.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .core import ExperienceDataset, Video
from .encoders import PcaProjection, encode_video, pca_apply


class DistanceMetric(Enum):
    L2 = "l2"
    COSINE = "cosine"


class BufferPolicy(Enum):
    LATEST = "latest"
    AGGREGATE = "aggregate"


@dataclass(frozen=True)
class RetrievalConfig:
    metric: DistanceMetric = DistanceMetric.L2
    tau: float | None = None  # None resolves to 0.1 * median canonical distance
    buffer_policy: BufferPolicy = BufferPolicy.LATEST

    def __post_init__(self) -> None:
        if self.tau is not None and not self.tau > 0:
            raise ValueError("tau must be positive")


@dataclass(frozen=True)
class EmbeddingTable:
    """Projected per-video embeddings plus canonical embeddings per object."""

    object_ids: tuple[str, ...]          # distinct objects, manifest order
    canonical: np.ndarray                # (m, k)
    entry_embeddings: np.ndarray         # (n, k), dataset order
    entry_object_index: np.ndarray       # (n,) index into object_ids
    projection: PcaProjection
    _median_canonical: float = field(init=False, default=0.0)

    def __post_init__(self) -> None:
        if len(self.object_ids) != self.canonical.shape[0]:
            raise ValueError("one canonical embedding per object required")
        if self.entry_embeddings.shape[0] != self.entry_object_index.shape[0]:
            raise ValueError("entry arrays length mismatch")
        object.__setattr__(
            self, "_median_canonical", _median_pairwise_distance(self.canonical)
        )

    def __len__(self) -> int:
        return self.entry_embeddings.shape[0]

    def canonical_for(self, object_id: str) -> np.ndarray:
        return self.canonical[self.object_ids.index(object_id)]

    def entry_object_id(self, entry: int) -> str:
        return self.object_ids[int(self.entry_object_index[entry])]

    @property
    def median_canonical_distance(self) -> float:
        return self._median_canonical


def _median_pairwise_distance(points: np.ndarray) -> float:
    m = points.shape[0]
    if m < 2:
        return 0.0
    diffs = points[:, None, :] - points[None, :, :]
    dists = np.sqrt((diffs * diffs).sum(axis=-1))
    iu = np.triu_indices(m, k=1)
    return float(np.median(dists[iu]))


def build_table(
    dataset: ExperienceDataset,
    projection: PcaProjection,
    encoder: Callable[[Video], np.ndarray] = encode_video,
) -> EmbeddingTable:
    """Encode and project every dataset video; pick canonical embeddings.

    The canonical embedding of an object is the projected embedding of
    its first successful entry in manifest order.  Errors if the dataset
    is empty or an object has no successful entry.
    """
    if len(dataset) == 0:
        raise ValueError("cannot build a table from an empty dataset")
    raw = np.stack([encoder(item.video) for item in dataset.tuples])
    projected = pca_apply(projection, raw)
    object_ids = tuple(dataset.by_object.keys())
    id_to_pos = {oid: i for i, oid in enumerate(object_ids)}
    canonical = np.zeros((len(object_ids), projected.shape[1]), dtype=np.float64)
    for oid, idxs in dataset.by_object.items():
        first_success = next(
            (i for i in idxs if dataset.tuples[i].success), None
        )
        if first_success is None:
            raise ValueError(f"object {oid!r} has no successful entry")
        canonical[id_to_pos[oid]] = projected[first_success]
    entry_index = np.array(
        [id_to_pos[item.object_id] for item in dataset.tuples], dtype=np.int64
    )
    return EmbeddingTable(
        object_ids=object_ids,
        canonical=canonical,
        entry_embeddings=projected,
        entry_object_index=entry_index,
        projection=projection,
    )


def embedding_distance(metric: DistanceMetric, a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"embedding shape mismatch: {a.shape} vs {b.shape}")
    if metric is DistanceMetric.L2:
        return float(np.linalg.norm(a - b))
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise ValueError("cosine distance undefined for zero vectors")
    return float(1.0 - np.dot(a, b) / (na * nb))


def default_tau(table: EmbeddingTable) -> float:
    """0.1 of the median pairwise canonical distance; 1.0 when degenerate."""
    med = table.median_canonical_distance
    return 0.1 * med if med > 0 else 1.0


def _query_embedding(
    table: EmbeddingTable,
    video: Video,
    encoder: Callable[[Video], np.ndarray],
) -> np.ndarray:
    return pca_apply(table.projection, encoder(video))


def _entry_logits(
    table: EmbeddingTable,
    query: np.ndarray,
    metric: DistanceMetric,
) -> np.ndarray:
    if metric is DistanceMetric.L2:
        diffs = table.entry_embeddings - query
        return -np.sqrt((diffs * diffs).sum(axis=1))
    return -np.array(
        [embedding_distance(metric, query, e) for e in table.entry_embeddings]
    )


def retrieval_probabilities(
    table: EmbeddingTable,
    query: Video | Sequence[Video],
    config: RetrievalConfig = RetrievalConfig(),
    encoder: Callable[[Video], np.ndarray] = encode_video,
) -> np.ndarray:
    """Softmax selection probabilities over table entries for a query.

    ``query`` is one interaction video or a non-empty buffer of them; the
    buffer policy either keeps the latest video or averages logits over
    the buffer before the softmax.
    """
    if len(table) == 0:
        raise ValueError("empty table")
    if isinstance(query, Video):
        videos = [query]
    else:
        videos = list(query)
        if not videos:
            raise ValueError("empty interaction buffer; use the null embedding instead")
        if config.buffer_policy is BufferPolicy.LATEST:
            videos = videos[-1:]
    tau = config.tau if config.tau is not None else default_tau(table)
    logits = np.mean(
        [_entry_logits(table, _query_embedding(table, v, encoder), config.metric) for v in videos],
        axis=0,
    )
    scaled = logits / tau
    scaled -= scaled.max()
    weights = np.exp(scaled)
    return weights / weights.sum()


def retrieve(
    table: EmbeddingTable,
    query: Video | Sequence[Video],
    config: RetrievalConfig,
    rng: np.random.Generator,
    encoder: Callable[[Video], np.ndarray] = encode_video,
) -> np.ndarray:
    """Sample an entry from the retrieval softmax; return its object's
    canonical embedding."""
    probs = retrieval_probabilities(table, query, config, encoder)
    entry = int(np.searchsorted(np.cumsum(probs), rng.random(), side="right"))
    entry = min(entry, len(probs) - 1)
    return table.canonical[int(table.entry_object_index[entry])].copy()


def save_table(table: EmbeddingTable, path: str | Path) -> None:
    np.savez(
        path,
        object_ids=np.array(table.object_ids),
        canonical=table.canonical,
        entry_embeddings=table.entry_embeddings,
        entry_object_index=table.entry_object_index,
        mean=table.projection.mean,
        components=table.projection.components,
        k=np.array(table.projection.k),
        degenerate=np.array(table.projection.degenerate),
    )


def load_table(path: str | Path) -> EmbeddingTable:
    with np.load(path, allow_pickle=False) as data:
        projection = PcaProjection(
            mean=data["mean"],
            components=data["components"],
            k=int(data["k"]),
            degenerate=bool(data["degenerate"]),
        )
        return EmbeddingTable(
            object_ids=tuple(str(x) for x in data["object_ids"]),
            canonical=data["canonical"],
            entry_embeddings=data["entry_embeddings"],
            entry_object_index=data["entry_object_index"],
            projection=projection,
        )
