"""Significance machinery: paired Wilcoxon, Bonferroni, OLS with t-tests."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special
from scipy.stats import rankdata

from .errors import DataError

# Exact Wilcoxon null enumeration below this many nonzero differences,
# normal approximation with continuity correction above.
EXACT_WILCOXON_MAX_N = 25


@dataclass(frozen=True)
class TestResult:
    statistic: float
    p: float
    n_effective: int
    degenerate: bool = False

    def to_dict(self) -> dict:
        return {
            "statistic": float(self.statistic),
            "p": float(self.p),
            "n_effective": int(self.n_effective),
            "degenerate": bool(self.degenerate),
        }


def _wilcoxon_exact_p(ranks: np.ndarray, w: float) -> float:
    """Two-sided exact p for the signed-rank sum under the null.

    Doubled ranks are integers even with average-rank ties, so the null
    distribution of 2 W+ over all sign patterns is tabulated by dynamic
    programming.
    """
    doubled = np.rint(2.0 * ranks).astype(np.int64)
    total = int(doubled.sum())
    counts = np.zeros(total + 1)
    counts[0] = 1.0
    for r in doubled:
        shifted = np.zeros_like(counts)
        shifted[r:] = counts[: total + 1 - r]
        counts = counts + shifted
    counts /= counts.sum()
    w2 = int(round(2.0 * w))
    cdf = counts[: w2 + 1].sum()
    sf = counts[w2:].sum()
    return float(min(1.0, 2.0 * min(cdf, sf)))


def wilcoxon_signed_rank(
    x: np.ndarray, y: np.ndarray, exact_max_n: int = EXACT_WILCOXON_MAX_N
) -> TestResult:
    """Paired two-sided Wilcoxon signed-rank test.

    Zero differences are dropped before ranking; ties get average ranks. The
    statistic is min(W+, W-). The null distribution is enumerated exactly up
    to ``exact_max_n`` effective pairs and approximated by a tie-corrected
    normal with continuity correction above.
    """
    xa = np.asarray(x, dtype=np.float64).ravel()
    ya = np.asarray(y, dtype=np.float64).ravel()
    if xa.shape != ya.shape:
        raise DataError("wilcoxon_signed_rank: inputs must have equal length")
    diff = xa - ya
    diff = diff[diff != 0]
    n = diff.size
    if n == 0:
        return TestResult(statistic=0.0, p=1.0, n_effective=0, degenerate=True)
    if n < 5:
        raise DataError(
            f"wilcoxon_signed_rank: need >= 5 nonzero differences, got {n}"
        )
    ranks = rankdata(np.abs(diff))
    w_plus = float(ranks[diff > 0].sum())
    w_minus = float(ranks[diff < 0].sum())
    statistic = min(w_plus, w_minus)

    if n <= exact_max_n:
        p = _wilcoxon_exact_p(ranks, w_plus)
    else:
        mean = n * (n + 1) / 4.0
        _, tie_counts = np.unique(ranks, return_counts=True)
        var = n * (n + 1) * (2 * n + 1) / 24.0 - np.sum(
            tie_counts**3 - tie_counts
        ) / 48.0
        # continuity correction toward the mean
        z = (w_plus - mean - 0.5 * np.sign(w_plus - mean)) / np.sqrt(var)
        p = float(min(1.0, 2.0 * special.ndtr(-abs(z))))
    return TestResult(statistic=statistic, p=p, n_effective=n)


def bonferroni(pvals: np.ndarray) -> np.ndarray:
    """Multiply by the family size and cap at 1."""
    p = np.asarray(pvals, dtype=np.float64).ravel()
    if np.any(p < 0) or np.any(p > 1):
        raise DataError("bonferroni: p-values must lie in [0, 1]")
    return np.minimum(1.0, p * p.size)


@dataclass(frozen=True)
class OlsResult:
    """Least-squares fit with an internally added intercept (coefficient 0)."""

    coefs: np.ndarray
    std_errs: np.ndarray
    t_stats: np.ndarray
    p_values: np.ndarray
    adjusted_r2: float
    r2: float
    dof: int

    def to_rows(self, names: list[str] | None = None) -> list[dict]:
        names = names or [f"x{i}" for i in range(1, self.coefs.size)]
        terms = ["Intercept"] + list(names)
        return [
            {
                "term": terms[i],
                "coef": float(self.coefs[i]),
                "std_err": float(self.std_errs[i]),
                "t": float(self.t_stats[i]),
                "p": float(self.p_values[i]),
            }
            for i in range(self.coefs.size)
        ]


def ols_fit(x: np.ndarray, y: np.ndarray) -> OlsResult:
    """OLS with coefficient t-tests and adjusted R-squared.

    Requires n > k + 1 observations and a full-rank design (after the
    intercept column is added).
    """
    xa = np.asarray(x, dtype=np.float64)
    ya = np.asarray(y, dtype=np.float64).ravel()
    if xa.ndim == 1:
        xa = xa[:, None]
    n, k = xa.shape
    if ya.size != n:
        raise DataError("ols_fit: X and y must have the same number of rows")
    if n <= k + 1:
        raise DataError(f"ols_fit: need n > k + 1 observations, got n={n}, k={k}")
    design = np.column_stack([np.ones(n), xa])
    if np.linalg.matrix_rank(design) < k + 1:
        raise DataError("ols_fit: design matrix is rank deficient")

    coefs, _, _, _ = np.linalg.lstsq(design, ya, rcond=None)
    residuals = ya - design @ coefs
    rss = float(residuals @ residuals)
    tss = float(np.sum((ya - ya.mean()) ** 2))
    if tss <= 0:
        raise DataError("ols_fit: response is constant")
    dof = n - k - 1
    sigma2 = rss / dof
    cov = sigma2 * np.linalg.inv(design.T @ design)
    std_errs = np.sqrt(np.diag(cov))
    with np.errstate(divide="ignore", invalid="ignore"):
        t_stats = np.where(std_errs > 0, coefs / np.where(std_errs > 0, std_errs, 1.0),
                           np.where(coefs == 0, 0.0, np.inf * np.sign(coefs)))
    p_values = np.where(
        np.isfinite(t_stats), 2.0 * special.stdtr(dof, -np.abs(np.nan_to_num(t_stats))), 0.0
    )
    r2 = 1.0 - rss / tss
    adjusted_r2 = 1.0 - (1.0 - r2) * (n - 1) / dof
    return OlsResult(
        coefs=coefs,
        std_errs=std_errs,
        t_stats=t_stats,
        p_values=p_values,
        adjusted_r2=float(adjusted_r2),
        r2=float(r2),
        dof=dof,
    )
