"""Cross-validated ridge encoding pipeline.

Per fold: standardize predictors and targets with training-fold statistics,
fit ridge on the training rows, predict the held-out rows, score each target
column with a Pearson correlation, average correlations across columns, and
combine per-column p-values with Fisher's method. Fold-level numbers are
aggregated into a single ceiling-normalized score.

Degenerate columns (constant observed or predicted values) score r = 0 with
p = 1 and are counted in the report instead of producing NaN.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy import linalg as sla
from scipy import special

from .errors import DataError
from .tensorio import ActivationTensor, ResponseMatrix, zscore_apply, zscore_fit

DEFAULT_ALPHA = 0.2
# Spans four decades around the default; used when a grid search is requested
# without an explicit grid.
DEFAULT_ALPHA_GRID = (0.01, 0.05, 0.1, 0.2, 0.5, 1.0, 10.0)


def _as_2d(x, what: str) -> np.ndarray:
    if isinstance(x, (ActivationTensor, ResponseMatrix)):
        x = x.data
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 2:
        raise DataError(f"{what}: expected a 2-D matrix, got shape {arr.shape}")
    return arr


# ---------------------------------------------------------------------------
# Folds


@dataclass(frozen=True)
class FoldSpec:
    """Deterministic balanced k-fold assignment of ``n_items`` items.

    The same ``(n_items, k, seed)`` always yields identical assignments;
    fold sizes differ by at most one.
    """

    n_items: int
    k: int
    seed: int
    assignments: np.ndarray

    def test_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments == fold)

    def train_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments != fold)


def make_folds(n_items: int, k: int = 5, seed: int = 0) -> FoldSpec:
    """Seeded shuffled partition into k folds of near-equal size."""
    if k < 2:
        raise DataError(f"make_folds: k must be >= 2, got {k}")
    if n_items < k:
        raise DataError(f"make_folds: k={k} exceeds n_items={n_items}")
    order = np.random.default_rng(seed).permutation(n_items)
    assignments = np.empty(n_items, dtype=np.int64)
    sizes = [n_items // k + (1 if f < n_items % k else 0) for f in range(k)]
    start = 0
    for f, size in enumerate(sizes):
        assignments[order[start : start + size]] = f
        start += size
    return FoldSpec(n_items=n_items, k=k, seed=seed, assignments=assignments)


# ---------------------------------------------------------------------------
# Ridge


@dataclass(frozen=True)
class RidgeConfig:
    """Regularization strength, optionally with a search grid."""

    alpha: float = DEFAULT_ALPHA
    alpha_grid: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        if self.alpha < 0:
            raise DataError("RidgeConfig: alpha must be nonnegative")
        if self.alpha_grid is not None:
            grid = tuple(float(a) for a in self.alpha_grid)
            if not grid:
                raise DataError("RidgeConfig: alpha_grid must be nonempty when present")
            if any(a < 0 for a in grid):
                raise DataError("RidgeConfig: alpha_grid entries must be nonnegative")
            object.__setattr__(self, "alpha_grid", grid)


def ridge_solve(x: np.ndarray, y: np.ndarray, alpha: float) -> np.ndarray:
    """Minimize ||XW - Y||^2 + alpha ||W||^2 per target column.

    Solves the normal equations directly on the data as given (no intercept);
    alpha = 0 requires X'X to be invertible.
    """
    x = _as_2d(x, "ridge_solve X")
    y = _as_2d(y, "ridge_solve Y")
    if x.shape[0] != y.shape[0]:
        raise DataError(
            f"ridge_solve: X has {x.shape[0]} rows but Y has {y.shape[0]}"
        )
    if not (np.isfinite(x).all() and np.isfinite(y).all()):
        raise DataError("ridge_solve: inputs contain NaN or Inf")
    if alpha < 0:
        raise DataError("ridge_solve: alpha must be nonnegative")
    gram = x.T @ x + alpha * np.eye(x.shape[1])
    try:
        return sla.solve(gram, x.T @ y, assume_a="pos")
    except np.linalg.LinAlgError as exc:
        raise DataError(f"ridge_solve: singular system at alpha={alpha}") from exc


@dataclass(frozen=True)
class RidgeModel:
    """Ridge weights with the intercept implied by centering."""

    weights: np.ndarray
    x_mean: np.ndarray
    y_mean: np.ndarray

    @property
    def intercept(self) -> np.ndarray:
        return self.y_mean - self.x_mean @ self.weights

    def predict(self, x: np.ndarray) -> np.ndarray:
        arr = _as_2d(x, "RidgeModel.predict")
        return (arr - self.x_mean) @ self.weights + self.y_mean


def ridge_fit(x: np.ndarray, y: np.ndarray, alpha: float) -> RidgeModel:
    """Center X and Y, solve for the weights, keep the implied intercept."""
    x = _as_2d(x, "ridge_fit X")
    y = _as_2d(y, "ridge_fit Y")
    x_mean = x.mean(axis=0)
    y_mean = y.mean(axis=0)
    weights = ridge_solve(x - x_mean, y - y_mean, alpha)
    return RidgeModel(weights=weights, x_mean=x_mean, y_mean=y_mean)


# ---------------------------------------------------------------------------
# Correlation and p-value machinery


class PearsonResult(NamedTuple):
    r: float
    p: float
    degenerate: bool


def _pearson_columns(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Column-wise Pearson r and two-sided p for two aligned matrices.

    Constant columns in either input are degenerate: r = 0, p = 1.
    """
    n = a.shape[0]
    ac = a - a.mean(axis=0)
    bc = b - b.mean(axis=0)
    var_a = np.einsum("ij,ij->j", ac, ac)
    var_b = np.einsum("ij,ij->j", bc, bc)
    degenerate = (var_a <= 0) | (var_b <= 0)
    denom = np.sqrt(np.where(degenerate, 1.0, var_a * var_b))
    r = np.einsum("ij,ij->j", ac, bc) / denom
    r = np.clip(np.where(degenerate, 0.0, r), -1.0, 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = r * np.sqrt((n - 2) / (1.0 - r * r))
    p = np.where(
        np.abs(r) >= 1.0, 0.0, 2.0 * special.stdtr(n - 2, -np.abs(np.nan_to_num(t)))
    )
    p = np.where(degenerate, 1.0, p)
    return r, p, degenerate


def pearson_r(x: Sequence[float], y: Sequence[float]) -> PearsonResult:
    """Pearson correlation with a two-sided t-test p-value (n - 2 dof)."""
    xa = np.asarray(x, dtype=np.float64).ravel()
    ya = np.asarray(y, dtype=np.float64).ravel()
    if xa.shape != ya.shape:
        raise DataError("pearson_r: inputs must have equal length")
    if xa.size < 3:
        raise DataError("pearson_r: need at least 3 points")
    r, p, degenerate = _pearson_columns(xa[:, None], ya[:, None])
    return PearsonResult(r=float(r[0]), p=float(p[0]), degenerate=bool(degenerate[0]))


def fisher_combine(pvals: Sequence[float], floor: float = 1e-300) -> float:
    """Combine independent p-values: -2 sum(ln p) ~ chi-square with 2m dof.

    Exact zeros are clamped to ``floor`` with a warning; out-of-range values
    are rejected.
    """
    p = np.asarray(pvals, dtype=np.float64).ravel()
    if p.size < 1:
        raise DataError("fisher_combine: need at least one p-value")
    if np.any(p < 0) or np.any(p > 1):
        raise DataError("fisher_combine: p-values must lie in [0, 1]")
    if np.any(p == 0):
        warnings.warn(
            f"fisher_combine: clamping {int(np.sum(p == 0))} zero p-value(s) to {floor}",
            RuntimeWarning,
            stacklevel=2,
        )
        p = np.maximum(p, floor)
    stat = -2.0 * float(np.log(p).sum())
    return float(special.chdtrc(2 * p.size, stat))


# ---------------------------------------------------------------------------
# Voxel selection and noise ceiling


@dataclass(frozen=True)
class ReliabilitySelection:
    """Split-half reliability per voxel and the retained top fraction."""

    per_voxel_reliability: np.ndarray
    selected: np.ndarray
    fraction: float


def reliability_select(
    half_a: ResponseMatrix | np.ndarray,
    half_b: ResponseMatrix | np.ndarray,
    fraction: float = 0.1,
) -> ReliabilitySelection:
    """Rank voxels by Spearman-Brown corrected split-half correlation.

    Reliability is 2r / (1 + r) where r correlates a voxel's responses across
    the two halves. Voxels constant in either half get reliability -1 and are
    never selected ahead of informative ones. The top ``ceil(fraction * v)``
    voxels are retained, ties broken by lowest index.
    """
    a = _as_2d(half_a, "reliability_select half_a")
    b = _as_2d(half_b, "reliability_select half_b")
    if a.shape != b.shape:
        raise DataError(
            f"reliability_select: halves must share shape, got {a.shape} vs {b.shape}"
        )
    if not 0 < fraction <= 1:
        raise DataError("reliability_select: fraction must lie in (0, 1]")
    r, _, degenerate = _pearson_columns(a, b)
    denom = 1.0 + r
    with np.errstate(divide="ignore"):
        reliability = np.where(denom > 1e-12, 2.0 * r / np.where(denom > 0, denom, 1.0), -np.inf)
    reliability = np.where(degenerate, -1.0, reliability)
    n_sel = math.ceil(fraction * reliability.size)
    order = np.argsort(-reliability, kind="stable")
    selected = np.sort(order[:n_sel])
    return ReliabilitySelection(
        per_voxel_reliability=reliability, selected=selected, fraction=float(fraction)
    )


def noise_ceiling(responses: Sequence[ResponseMatrix | np.ndarray]) -> float:
    """Leave-one-out inter-subject ceiling on achievable prediction correlation.

    Each subject is correlated voxel-wise against the mean of the remaining
    subjects; voxel correlations are averaged per subject and then across
    subjects. The result is clamped to [1e-6, 1].
    """
    mats = [_as_2d(m, "noise_ceiling") for m in responses]
    if len(mats) < 3:
        raise DataError("noise_ceiling: need at least 3 subjects")
    shape = mats[0].shape
    if any(m.shape != shape for m in mats):
        raise DataError("noise_ceiling: all subjects must share the same shape")
    stack = np.stack(mats)
    total = stack.sum(axis=0)
    per_subject = []
    for i, m in enumerate(mats):
        others_mean = (total - m) / (len(mats) - 1)
        r, _, _ = _pearson_columns(m, others_mean)
        per_subject.append(float(r.mean()))
    return float(np.clip(np.mean(per_subject), 1e-6, 1.0))


# ---------------------------------------------------------------------------
# Brain score


@dataclass(frozen=True)
class ScoreReport:
    """Fold-resolved encoding score for one (activations, responses) pair."""

    per_voxel_r: np.ndarray
    fold_mean_r: np.ndarray
    fold_p: np.ndarray
    mean_r: float
    median_fold_p: float
    ceiling: float
    brain_score: float
    alpha: float
    alpha_grid: tuple[float, ...] | None
    n_degenerate: int
    folds_seed: int
    k_folds: int

    def to_dict(self, include_per_voxel: bool = False) -> dict:
        doc = {
            "fold_mean_r": [float(v) for v in self.fold_mean_r],
            "fold_p": [float(v) for v in self.fold_p],
            "mean_r": float(self.mean_r),
            "median_fold_p": float(self.median_fold_p),
            "ceiling": float(self.ceiling),
            "brain_score": float(self.brain_score),
            "alpha": float(self.alpha),
            "alpha_grid": list(self.alpha_grid) if self.alpha_grid else None,
            "alpha_selection": (
                "max mean fold correlation on the same folds (optimistic bias)"
                if self.alpha_grid
                else "fixed"
            ),
            "n_degenerate": int(self.n_degenerate),
            "folds_seed": int(self.folds_seed),
            "k_folds": int(self.k_folds),
        }
        if include_per_voxel:
            doc["per_voxel_r"] = [[float(v) for v in row] for row in self.per_voxel_r]
        return doc


def _cv_pass(
    x: np.ndarray, y: np.ndarray, folds: FoldSpec, alpha: float
) -> tuple[np.ndarray, np.ndarray, np.ndarray, int]:
    per_voxel_r = np.empty((folds.k, y.shape[1]))
    fold_mean_r = np.empty(folds.k)
    fold_p = np.empty(folds.k)
    n_degenerate = 0
    for f in range(folds.k):
        tr, te = folds.train_indices(f), folds.test_indices(f)
        x_stats = zscore_fit(x[tr])
        y_stats = zscore_fit(y[tr])
        x_tr, x_te = zscore_apply(x_stats, x[tr]), zscore_apply(x_stats, x[te])
        y_tr, y_te = zscore_apply(y_stats, y[tr]), zscore_apply(y_stats, y[te])
        model = ridge_fit(x_tr, y_tr, alpha)
        pred = model.predict(x_te)
        r, p, degenerate = _pearson_columns(pred, y_te)
        per_voxel_r[f] = r
        fold_mean_r[f] = r.mean()
        fold_p[f] = fisher_combine(np.maximum(p, 1e-300))
        n_degenerate += int(degenerate.sum())
    return per_voxel_r, fold_mean_r, fold_p, n_degenerate


def brain_score(
    x: ActivationTensor | np.ndarray,
    y: ResponseMatrix | np.ndarray,
    folds: FoldSpec,
    cfg: RidgeConfig | None = None,
    ceiling: float = 1.0,
) -> ScoreReport:
    """Ceiling-normalized cross-validated encoding score.

    When ``cfg.alpha_grid`` is present the strength maximizing the mean fold
    correlation (on the same folds) is selected before the reported pass.
    """
    cfg = cfg or RidgeConfig()
    xd = _as_2d(x, "brain_score X")
    yd = _as_2d(y, "brain_score Y")
    if xd.shape[0] != yd.shape[0]:
        raise DataError(
            f"brain_score: X has {xd.shape[0]} stimuli but Y has {yd.shape[0]}"
        )
    if xd.shape[0] != folds.n_items:
        raise DataError(
            f"brain_score: folds cover {folds.n_items} items but data has {xd.shape[0]}"
        )
    if ceiling <= 0:
        raise DataError("brain_score: ceiling must be positive")

    alpha = cfg.alpha
    if cfg.alpha_grid:
        grid_means = [
            float(_cv_pass(xd, yd, folds, a)[1].mean()) for a in cfg.alpha_grid
        ]
        alpha = cfg.alpha_grid[int(np.argmax(grid_means))]

    per_voxel_r, fold_mean_r, fold_p, n_degenerate = _cv_pass(xd, yd, folds, alpha)
    mean_r = float(fold_mean_r.mean())
    return ScoreReport(
        per_voxel_r=per_voxel_r,
        fold_mean_r=fold_mean_r,
        fold_p=fold_p,
        mean_r=mean_r,
        median_fold_p=float(np.median(fold_p)),
        ceiling=float(ceiling),
        brain_score=mean_r / float(ceiling),
        alpha=float(alpha),
        alpha_grid=cfg.alpha_grid,
        n_degenerate=n_degenerate,
        folds_seed=folds.seed,
        k_folds=folds.k,
    )
