"""Principal component analysis with a deterministic sign convention.

Covariance/SVD semantics: columns are centered but never rescaled. Each
component row is flipped so that its largest-magnitude entry is positive,
which keeps fitted models reproducible across runs and BLAS builds.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import tensorio
from .errors import DataError


@dataclass(frozen=True)
class PcaModel:
    """Fitted PCA basis.

    ``rank`` is the numerical rank of the centered training data. When the
    requested component count exceeds it, ratios beyond ``rank`` are exactly 0
    and the corresponding component rows are arbitrary orthonormal
    completions.
    """

    mean: np.ndarray
    components: np.ndarray
    explained_variance_ratio: np.ndarray
    rank: int

    @property
    def n_components(self) -> int:
        return self.components.shape[0]

    @property
    def n_features(self) -> int:
        return self.components.shape[1]

    @property
    def rank_deficient(self) -> bool:
        return self.rank < self.n_components


def pca_fit(x: np.ndarray, k: int) -> PcaModel:
    """Fit the top-k variance directions of column-centered ``x``.

    Requires ``1 <= k <= min(n - 1, d)``. Rank-deficient inputs are permitted;
    see :class:`PcaModel`.
    """
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 2:
        raise DataError("pca_fit: expected a 2-D matrix")
    n, d = arr.shape
    if n < 2:
        raise DataError("pca_fit: need at least 2 rows")
    if not 1 <= k <= min(n - 1, d):
        raise DataError(f"pca_fit: k={k} out of range [1, {min(n - 1, d)}]")

    mean = arr.mean(axis=0)
    centered = arr - mean
    _, svals, vt = np.linalg.svd(centered, full_matrices=False)

    total = float(np.sum(svals**2))
    if total > 0:
        tol = svals[0] * max(n, d) * np.finfo(np.float64).eps
        rank = int(np.sum(svals > tol))
        ratios = svals[:k] ** 2 / total
    else:
        rank = 0
        ratios = np.zeros(k)
    ratios[min(rank, k):] = 0.0

    components = vt[:k].copy()
    flip = components[np.arange(k), np.argmax(np.abs(components), axis=1)] < 0
    components[flip] *= -1.0
    return PcaModel(
        mean=mean,
        components=components,
        explained_variance_ratio=ratios,
        rank=min(rank, k),
    )


def pca_transform(model: PcaModel, x: np.ndarray) -> np.ndarray:
    """Project rows of ``x`` onto the fitted components after centering."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != model.n_features:
        raise DataError(
            f"pca_transform: expected {model.n_features} columns, got shape {arr.shape}"
        )
    return (arr - model.mean) @ model.components.T


def pca_inverse_transform(model: PcaModel, z: np.ndarray) -> np.ndarray:
    """Map component coordinates back into the original feature space."""
    arr = np.asarray(z, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != model.n_components:
        raise DataError(
            f"pca_inverse_transform: expected {model.n_components} columns, "
            f"got shape {arr.shape}"
        )
    return arr @ model.components + model.mean


def save_pca(model: PcaModel, manifest_path: str | Path, prefix: str) -> None:
    """Serialize a fitted model as manifest entries (float32 payloads)."""
    meta = {"kind": "pca", "rank": model.rank}
    tensorio.save_array(model.mean[None, :], manifest_path, f"{prefix}.mean", meta=meta)
    tensorio.save_array(model.components, manifest_path, f"{prefix}.components", meta=meta)
    tensorio.save_array(
        model.explained_variance_ratio[None, :],
        manifest_path,
        f"{prefix}.explained_variance_ratio",
        meta=meta,
    )


def load_pca(manifest_path: str | Path, prefix: str) -> PcaModel:
    """Inverse of :func:`save_pca` (up to float32 storage precision)."""
    mean, meta = tensorio.load_array(manifest_path, f"{prefix}.mean")
    components, _ = tensorio.load_array(manifest_path, f"{prefix}.components")
    ratios, _ = tensorio.load_array(manifest_path, f"{prefix}.explained_variance_ratio")
    return PcaModel(
        mean=mean.ravel().astype(np.float64),
        components=components.astype(np.float64),
        explained_variance_ratio=ratios.ravel().astype(np.float64),
        rank=int(meta.get("rank", components.shape[0])),
    )
