"""Seeded synthetic representation pairs with known ground truth.

Generators are pure functions of their spec and seed, so fixtures are
bitwise-reproducible. Effect sizes are dialed analytically: response columns
carry unit-variance signal, so a noise level of sigma gives a theoretical
per-voxel prediction correlation of 1 / sqrt(1 + sigma^2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .tensorio import ActivationTensor, ResponseMatrix

ABLATION_MODES = ("row_shuffle", "column_shuffle", "within_column_shuffle")


@dataclass(frozen=True)
class SynthSpec:
    n_stimuli: int
    d_source: int
    d_target: int
    noise_sigma: float = 0.0
    shared_rank: int | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_stimuli < 4:
            raise DataError("SynthSpec: n_stimuli must be >= 4")
        if self.d_source < 1 or self.d_target < 1:
            raise DataError("SynthSpec: dimensions must be >= 1")
        if self.noise_sigma < 0:
            raise DataError("SynthSpec: noise_sigma must be nonnegative")
        if self.shared_rank is None:
            object.__setattr__(self, "shared_rank", min(self.d_source, self.d_target))
        if not 0 <= self.shared_rank <= min(self.d_source, self.d_target):
            raise DataError(
                f"SynthSpec: shared_rank must lie in [0, {min(self.d_source, self.d_target)}]"
            )


def sigma_for_target_r(r: float) -> float:
    """Noise level that yields an expected per-voxel correlation of r."""
    if not 0 < r <= 1:
        raise DataError("sigma_for_target_r: r must lie in (0, 1]")
    return math.sqrt(1.0 / (r * r) - 1.0)


def gen_linear_pair(
    spec: SynthSpec,
) -> tuple[ActivationTensor, ResponseMatrix, np.ndarray]:
    """Gaussian source, linear map of controlled rank, additive Gaussian noise.

    Returns the source activations, the target responses, and the true
    mapping (float64). Map columns are normalized to unit length so each
    target column carries unit-variance signal; with shared_rank 0 the target
    is pure noise.
    """
    rng = np.random.default_rng(spec.seed)
    x = rng.standard_normal((spec.n_stimuli, spec.d_source))
    rank = spec.shared_rank
    if rank > 0:
        # orthonormal factors give the map a flat singular spectrum, so every
        # shared direction carries comparable signal
        left, _ = np.linalg.qr(rng.standard_normal((spec.d_source, rank)))
        right, _ = np.linalg.qr(rng.standard_normal((spec.d_target, rank)))
        weights = left @ right.T
        norms = np.linalg.norm(weights, axis=0)
        weights = weights / np.where(norms > 0, norms, 1.0)
    else:
        weights = np.zeros((spec.d_source, spec.d_target))
    noise = rng.standard_normal((spec.n_stimuli, spec.d_target))

    x32 = x.astype(np.float32)
    y = x32.astype(np.float64) @ weights + spec.noise_sigma * noise
    activations = ActivationTensor(
        data=x32, model_id="synth-linear", unit="layer", unit_index=0, condition="pos"
    )
    responses = ResponseMatrix(data=y.astype(np.float32), subject_id=f"synth-{spec.seed}")
    return activations, responses, weights


def gen_subject_responses(
    activations: ActivationTensor,
    weights: np.ndarray,
    noise_sigma: float,
    seed: int,
    subject: int,
) -> ResponseMatrix:
    """One subject's responses: shared linear signal plus subject-specific noise.

    The noise stream is keyed by (seed, subject), so a cohort regenerates
    bit-exactly and subjects are mutually independent given the signal.
    """
    rng = np.random.default_rng([seed, subject])
    noise = rng.standard_normal((activations.data.shape[0], weights.shape[1]))
    y = activations.data.astype(np.float64) @ weights + noise_sigma * noise
    return ResponseMatrix(data=y.astype(np.float32), subject_id=f"sub-{subject:02d}")


def gen_isometric_pair(
    n: int, d: int, seed: int = 0, permute: bool = True
) -> tuple[np.ndarray, np.ndarray]:
    """Gaussian point cloud and its row-permuted orthonormal rotation.

    With ``permute=False`` the rows stay aligned (pure rotation), which keeps
    row-aligned metrics such as CKA at their invariance value.
    """
    if n < 3 or d < 1:
        raise DataError("gen_isometric_pair: need n >= 3 and d >= 1")
    rng = np.random.default_rng(seed)
    source = rng.standard_normal((n, d))
    basis, upper = np.linalg.qr(rng.standard_normal((d, d)))
    basis = basis * np.sign(np.diag(upper))
    target = source @ basis
    if permute:
        target = target[rng.permutation(n)]
    return source, target


def ablate_structure(x: ActivationTensor, mode: str, seed: int = 0) -> ActivationTensor:
    """Destroy stimulus-to-feature structure by a seeded permutation.

    All modes preserve the multiset of values; ``within_column_shuffle`` also
    preserves each column's marginal statistics exactly.
    """
    if mode not in ABLATION_MODES:
        raise DataError(f"ablate_structure: mode must be one of {ABLATION_MODES}")
    rng = np.random.default_rng(seed)
    data = x.data.copy()
    if mode == "row_shuffle":
        data = data[rng.permutation(data.shape[0])]
    elif mode == "column_shuffle":
        data = data[:, rng.permutation(data.shape[1])]
    else:
        data = rng.permuted(data, axis=0)
    return ActivationTensor(
        data=data,
        model_id=x.model_id,
        unit=x.unit,
        unit_index=x.unit_index,
        condition=x.condition,
    )
