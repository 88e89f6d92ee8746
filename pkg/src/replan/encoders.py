"""Frame/video embeddings: block-average features plus a PCA projection."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import Video
from .envs import IMAGE_SIZE

BLOCK = 4
FEATURES_PER_FRAME = (IMAGE_SIZE // BLOCK) ** 2  # 64


def encode_frame(frame: np.ndarray) -> np.ndarray:
    """4x4 block-average a 32x32 frame to a 64-vector (row-major blocks)."""
    frame = np.asarray(frame, dtype=np.float64)
    if frame.shape != (IMAGE_SIZE, IMAGE_SIZE):
        raise ValueError(f"expected {IMAGE_SIZE}x{IMAGE_SIZE} frame, got {frame.shape}")
    n = IMAGE_SIZE // BLOCK
    return frame.reshape(n, BLOCK, n, BLOCK).mean(axis=(1, 3)).reshape(-1)


def encode_video(video: Video) -> np.ndarray:
    """Concatenate per-frame block features; an 8-frame clip gives 512 dims."""
    if video.height != IMAGE_SIZE or video.width != IMAGE_SIZE:
        raise ValueError(f"expected {IMAGE_SIZE}x{IMAGE_SIZE} frames, got {video.height}x{video.width}")
    t = video.length
    n = IMAGE_SIZE // BLOCK
    feats = video.pixels.astype(np.float64).reshape(t, n, BLOCK, n, BLOCK).mean(axis=(2, 4))
    return feats.reshape(t * FEATURES_PER_FRAME)


@dataclass(frozen=True)
class PcaProjection:
    """Linear projection onto the top principal directions.

    ``components`` rows are orthonormal, ordered by decreasing explained
    variance, each signed so its largest-magnitude entry is positive.
    ``degenerate`` flags directions chosen as an arbitrary orthonormal
    completion because the data had fewer non-zero variance directions
    than ``k``.
    """

    mean: np.ndarray          # (d,)
    components: np.ndarray    # (k, d)
    k: int
    degenerate: bool = False
    rescale_variance: bool = False
    scales: np.ndarray | None = None  # (k,) divisors when rescale_variance

    def __post_init__(self) -> None:
        mean = np.asarray(self.mean, dtype=np.float64)
        comps = np.asarray(self.components, dtype=np.float64)
        if comps.shape != (self.k, mean.shape[0]):
            raise ValueError("components shape does not match (k, d)")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "components", comps)
        if self.scales is not None:
            object.__setattr__(self, "scales", np.asarray(self.scales, dtype=np.float64))


def pca_fit(embeddings: np.ndarray, k: int, rescale_variance: bool = False) -> PcaProjection:
    """Fit a k-component PCA on rows of ``embeddings``.

    Requires n >= 2 samples and k <= min(d, n - 1).  Deterministic: SVD
    ordering plus a sign convention (largest-|entry| of each component
    made positive; first occurrence wins ties).
    """
    x = np.asarray(embeddings, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"expected (n, d) embeddings, got shape {x.shape}")
    n, d = x.shape
    if n < 2:
        raise ValueError("need at least 2 samples to fit a projection")
    if not 1 <= k <= min(d, n - 1):
        raise ValueError(f"k={k} outside [1, min(d, n-1)={min(d, n - 1)}]")
    mean = x.mean(axis=0)
    centered = x - mean
    _, singular, vt = np.linalg.svd(centered, full_matrices=False)
    components = vt[:k].copy()
    # Zero-variance directions come from SVD's arbitrary orthonormal completion.
    tol = max(singular[0], 1.0) * 1e-12
    degenerate = bool(singular[min(k, len(singular)) - 1] <= tol)
    for i in range(k):
        j = int(np.argmax(np.abs(components[i])))
        if components[i, j] < 0:
            components[i] = -components[i]
    scales = None
    if rescale_variance:
        scales = np.maximum(singular[:k] / np.sqrt(n - 1), 1e-12)
    return PcaProjection(
        mean=mean,
        components=components,
        k=k,
        degenerate=degenerate,
        rescale_variance=rescale_variance,
        scales=scales,
    )


def pca_apply(projection: PcaProjection, embedding: np.ndarray) -> np.ndarray:
    """Project one embedding (d,) or a batch (n, d) to k dims."""
    e = np.asarray(embedding, dtype=np.float64)
    if e.shape[-1] != projection.mean.shape[0]:
        raise ValueError(
            f"embedding dim {e.shape[-1]} does not match projection dim {projection.mean.shape[0]}"
        )
    out = (e - projection.mean) @ projection.components.T
    if projection.rescale_variance and projection.scales is not None:
        out = out / projection.scales
    return out


def default_pca_k(n_samples: int, dim: int = 512, cap: int = 16) -> int:
    return max(1, min(cap, n_samples - 1, dim))


def save_projection(projection: PcaProjection, path: str | Path) -> None:
    payload = {
        "mean": projection.mean.tolist(),
        "components": projection.components.tolist(),
        "k": projection.k,
        "degenerate": projection.degenerate,
        "rescale_variance": projection.rescale_variance,
    }
    if projection.scales is not None:
        payload["scales"] = projection.scales.tolist()
    Path(path).write_text(json.dumps(payload))


def load_projection(path: str | Path) -> PcaProjection:
    payload = json.loads(Path(path).read_text())
    return PcaProjection(
        mean=np.asarray(payload["mean"], dtype=np.float64),
        components=np.asarray(payload["components"], dtype=np.float64),
        k=int(payload["k"]),
        degenerate=bool(payload.get("degenerate", False)),
        rescale_variance=bool(payload.get("rescale_variance", False)),
        scales=(
            np.asarray(payload["scales"], dtype=np.float64)
            if payload.get("scales") is not None
            else None
        ),
    )
