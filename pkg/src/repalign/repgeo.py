"""Geometry of representation spaces: RDMs, unbiased CKA, Gromov-Wasserstein.

The GW objective compares two within-space dissimilarity structures through a
soft matching: minimize sum_{ijkl} |A_ik - B_jl|^2 T_ij T_kl over couplings T
with prescribed row sums p and column sums q. The solver is conditional
gradient (Frank-Wolfe) on the exact quadratic objective, with the linearized
subproblem solved as an exact linear program; an entropic variant projects the
gradient step onto the coupling polytope with Sinkhorn iterations and is
preferred for larger instances. Reported losses are always the unregularized
objective of the returned coupling, so values are comparable across solver
settings.

The objective is non-convex, so the solver runs a small set of deterministic
initializations (a monotone plan along sorted mass-weighted mean
dissimilarities, the product coupling, and seeded random feasible plans) and
returns the best.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.optimize import linear_sum_assignment, linprog
from scipy.spatial.distance import cdist
from scipy.special import logsumexp

from . import reduce as _reduce
from .errors import DataError

DEFAULT_RDM_COMPONENTS = 50


# ---------------------------------------------------------------------------
# Types


@dataclass(frozen=True)
class Rdm:
    """Normalized representational dissimilarity matrix.

    Symmetric, nonnegative, zero diagonal, off-diagonal mean 1. Produced by
    :func:`build_rdm`; solver functions also accept plain square arrays when
    unnormalized costs are needed.
    """

    c: np.ndarray

    def __post_init__(self) -> None:
        c = np.asarray(self.c, dtype=np.float64)
        _check_cost(c, "Rdm")
        n = c.shape[0]
        off_mean = c.sum() / (n * (n - 1))
        if abs(off_mean - 1.0) > 1e-6:
            raise DataError(
                f"Rdm: off-diagonal mean must be 1 after normalization, got {off_mean}"
            )
        object.__setattr__(self, "c", c)

    @property
    def n(self) -> int:
        return self.c.shape[0]


@dataclass(frozen=True)
class MassVector:
    """Positive weights summing to one."""

    w: np.ndarray

    def __post_init__(self) -> None:
        w = np.asarray(self.w, dtype=np.float64).ravel()
        if w.size < 1 or np.any(w <= 0):
            raise DataError("MassVector: entries must be positive")
        if abs(w.sum() - 1.0) > 1e-9:
            raise DataError(f"MassVector: entries must sum to 1, got {w.sum()}")
        object.__setattr__(self, "w", w)

    @property
    def n(self) -> int:
        return self.w.size


def uniform_masses(n: int) -> MassVector:
    return MassVector(np.full(n, 1.0 / n))


@dataclass(frozen=True)
class Coupling:
    """Transport plan with its intended marginals.

    Construction does not enforce feasibility; use :func:`validate_coupling`
    to diagnose nonnegativity and marginal violations.
    """

    t: np.ndarray
    p: MassVector
    q: MassVector

    def __post_init__(self) -> None:
        t = np.asarray(self.t, dtype=np.float64)
        if t.ndim != 2 or t.shape != (self.p.n, self.q.n):
            raise DataError(
                f"Coupling: plan shape {t.shape} does not match masses "
                f"({self.p.n}, {self.q.n})"
            )
        if not np.isfinite(t).all():
            raise DataError("Coupling: plan contains NaN or Inf")
        object.__setattr__(self, "t", t)

    def marginal_violation(self) -> float:
        row = np.abs(self.t.sum(axis=1) - self.p.w).max()
        col = np.abs(self.t.sum(axis=0) - self.q.w).max()
        return float(max(row, col))


@dataclass(frozen=True)
class Violation:
    kind: str  # negative_entry | row_marginal | col_marginal
    index: tuple[int, ...]
    magnitude: float


@dataclass(frozen=True)
class GwSolverConfig:
    epsilon: float = 0.0
    max_outer_iters: int = 1000
    inner_iters: int = 200
    tol: float = 1e-9
    seed: int = 0
    restarts: int = 16

    def __post_init__(self) -> None:
        if self.epsilon < 0:
            raise DataError("GwSolverConfig: epsilon must be nonnegative")
        if self.max_outer_iters < 1:
            raise DataError("GwSolverConfig: max_outer_iters must be >= 1")
        if self.inner_iters < 1:
            raise DataError("GwSolverConfig: inner_iters must be >= 1")
        if self.tol <= 0:
            raise DataError("GwSolverConfig: tol must be positive")
        if self.restarts < 0:
            raise DataError("GwSolverConfig: restarts must be nonnegative")

    def to_dict(self) -> dict:
        return {
            "epsilon": float(self.epsilon),
            "max_outer_iters": int(self.max_outer_iters),
            "inner_iters": int(self.inner_iters),
            "tol": float(self.tol),
            "seed": int(self.seed),
            "restarts": int(self.restarts),
        }


@dataclass(frozen=True)
class GwResult:
    loss: float
    coupling: Coupling
    iterations: int
    converged: bool
    epsilon: float
    config: GwSolverConfig = field(repr=False, default_factory=GwSolverConfig)

    def to_dict(self, include_coupling: bool = False) -> dict:
        doc = {
            "loss": float(self.loss),
            "iterations": int(self.iterations),
            "converged": bool(self.converged),
            "epsilon": float(self.epsilon),
            "marginal_violation": self.coupling.marginal_violation(),
            "config": self.config.to_dict(),
        }
        if include_coupling:
            doc["coupling"] = [[float(v) for v in row] for row in self.coupling.t]
        return doc


# ---------------------------------------------------------------------------
# Validation helpers


def _check_cost(c: np.ndarray, what: str) -> None:
    if c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise DataError(f"{what}: cost matrix must be square, got shape {c.shape}")
    if c.shape[0] < 2:
        raise DataError(f"{what}: cost matrix needs at least 2 points")
    if not np.isfinite(c).all():
        raise DataError(f"{what}: cost matrix contains NaN or Inf")
    if np.any(c < 0):
        raise DataError(f"{what}: cost matrix must be nonnegative")
    if np.abs(c - c.T).max() > 1e-9:
        raise DataError(f"{what}: cost matrix must be symmetric")
    if np.abs(np.diag(c)).max() > 1e-9:
        raise DataError(f"{what}: cost matrix must have a zero diagonal")


def _as_cost(c: Rdm | np.ndarray, what: str) -> np.ndarray:
    if isinstance(c, Rdm):
        return c.c
    arr = np.asarray(c, dtype=np.float64)
    _check_cost(arr, what)
    arr = 0.5 * (arr + arr.T)
    np.fill_diagonal(arr, 0.0)
    return arr


def _as_mass(w: MassVector | np.ndarray | None, n: int, what: str) -> np.ndarray:
    if w is None:
        return np.full(n, 1.0 / n)
    if not isinstance(w, MassVector):
        w = MassVector(np.asarray(w))
    if w.n != n:
        raise DataError(f"{what}: mass vector has {w.n} entries, cost matrix has {n}")
    return w.w / w.w.sum()


# ---------------------------------------------------------------------------
# RDM construction


def _standardize_rows_exchangeably(arr: np.ndarray) -> np.ndarray:
    """Population z-scoring with row-order-independent column statistics.

    Sorting summands before reduction makes the means and stds bitwise
    identical under any row permutation, so RDMs are exactly permutation
    equivariant. Constant columns map to zeros, matching zscore semantics.
    """
    n = arr.shape[0]
    means = np.sort(arr, axis=0).sum(axis=0) / n
    centered = arr - means
    variances = np.sort(centered**2, axis=0).sum(axis=0) / n
    stds = np.sqrt(variances)
    constant = np.all(arr == arr[0, :], axis=0)
    out = centered / np.where(stds > 0, stds, 1.0)
    out[:, constant | (stds == 0)] = 0.0
    return out


def build_rdm(x: np.ndarray, pca_dims: int | None = None) -> Rdm:
    """Pairwise squared-distance structure of one representation space.

    Pipeline: optional PCA to ``pca_dims`` components, per-column z-scoring,
    pairwise squared Euclidean distances, then division by the mean
    off-diagonal distance (the diagonal is structurally zero and would only
    dilute the normalizer). Without PCA the output is exactly equivariant
    under row permutations.
    """
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 2:
        raise DataError("build_rdm: expected a 2-D matrix")
    n, d = arr.shape
    if n < 3:
        raise DataError("build_rdm: need at least 3 rows")
    if pca_dims is not None:
        if not 1 <= pca_dims <= min(n - 1, d):
            raise DataError(
                f"build_rdm: pca_dims={pca_dims} out of range [1, {min(n - 1, d)}]"
            )
        model = _reduce.pca_fit(arr, pca_dims)
        arr = _reduce.pca_transform(model, arr)
    arr = _standardize_rows_exchangeably(arr)
    costs = cdist(arr, arr, metric="sqeuclidean")
    costs = 0.5 * (costs + costs.T)
    np.fill_diagonal(costs, 0.0)
    off_mean = np.sort(costs, axis=None).sum() / (n * (n - 1))
    if off_mean <= 0:
        raise DataError("build_rdm: all rows identical, mean distance is zero")
    return Rdm(c=costs / off_mean)


def default_rdm_pca_dims(n: int, d: int) -> int:
    """Default component count for RDM construction: min(50, n - 1, d)."""
    return max(1, min(DEFAULT_RDM_COMPONENTS, n - 1, d))


# ---------------------------------------------------------------------------
# Unbiased CKA


def cka_unbiased(x: np.ndarray, y: np.ndarray) -> float:
    """Unbiased linear centered kernel alignment between two row-aligned matrices.

    Uses Gram matrices K = X X' and L = Y Y' with the unbiased HSIC estimator
    (zeroed diagonals, 1 / (n (n - 3)) scaling). Values lie in [-1, 1]; small
    negatives are possible by unbiasedness.
    """
    xa = np.asarray(x, dtype=np.float64)
    ya = np.asarray(y, dtype=np.float64)
    if xa.ndim != 2 or ya.ndim != 2:
        raise DataError("cka_unbiased: expected 2-D matrices")
    if xa.shape[0] != ya.shape[0]:
        raise DataError("cka_unbiased: inputs must have the same number of rows")
    n = xa.shape[0]
    if n < 4:
        raise DataError("cka_unbiased: the unbiased estimator requires n >= 4")
    k = xa @ xa.T
    l = ya @ ya.T
    np.fill_diagonal(k, 0.0)
    np.fill_diagonal(l, 0.0)
    hxy = _hsic_unbiased(k, l, n)
    hxx = _hsic_unbiased(k, k, n)
    hyy = _hsic_unbiased(l, l, n)
    # constant rows give an analytically zero self-HSIC that floats render as
    # cancellation noise; compare against the kernel's own magnitude
    scale_x = float(np.sum(k * k)) / (n * (n - 3))
    scale_y = float(np.sum(l * l)) / (n * (n - 3))
    if hxx <= 1e-10 * scale_x or hyy <= 1e-10 * scale_y or hxx <= 0 or hyy <= 0:
        raise DataError("cka_unbiased: degenerate input with vanishing self-HSIC")
    return float(hxy / math.sqrt(hxx * hyy))


def _hsic_unbiased(k: np.ndarray, l: np.ndarray, n: int) -> float:
    # k and l already have zeroed diagonals
    ks = k.sum()
    ls = l.sum()
    cross = k.sum(axis=1) @ l.sum(axis=1)
    return float(
        (np.sum(k * l) + ks * ls / ((n - 1) * (n - 2)) - 2.0 * cross / (n - 2))
        / (n * (n - 3))
    )


# ---------------------------------------------------------------------------
# Objective and subproblem solvers


def gw_objective(cost_a: Rdm | np.ndarray, cost_b: Rdm | np.ndarray, t: np.ndarray) -> float:
    """Exact quadratic matching objective of a plan, without marginal assumptions."""
    c1 = _as_cost(cost_a, "gw_objective cost_a")
    c2 = _as_cost(cost_b, "gw_objective cost_b")
    t = np.asarray(t, dtype=np.float64)
    row = t.sum(axis=1)
    col = t.sum(axis=0)
    quad = row @ (c1**2) @ row + col @ (c2**2) @ col
    cross = 2.0 * np.sum((c1 @ t @ c2) * t)
    return float(quad - cross)


def _emd(p: np.ndarray, q: np.ndarray, cost: np.ndarray) -> np.ndarray:
    """Exact linear optimal transport via the HiGHS LP solver."""
    n, m = cost.shape
    nm = n * m
    ones = np.ones(nm)
    row_of = np.repeat(np.arange(n), m)
    col_of = np.tile(np.arange(m), n)
    a_rows = sparse.coo_matrix((ones, (row_of, np.arange(nm))), shape=(n, nm))
    # last column constraint is implied by the others; dropping it keeps the
    # system consistent under floating-point mass totals
    keep = col_of < m - 1
    a_cols = sparse.coo_matrix(
        (ones[keep], (col_of[keep], np.arange(nm)[keep])), shape=(m - 1, nm)
    )
    a_eq = sparse.vstack([a_rows, a_cols]).tocsr()
    b_eq = np.concatenate([p, q[:-1]])
    res = linprog(cost.ravel(), A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    if not res.success:
        raise DataError(f"linear transport subproblem failed: {res.message}")
    return np.clip(res.x, 0.0, None).reshape(n, m)


def _sinkhorn_log(
    p: np.ndarray,
    q: np.ndarray,
    cost: np.ndarray,
    epsilon: float,
    n_iters: int,
    tol: float = 1e-11,
    warm: tuple[np.ndarray, np.ndarray] | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Log-domain Sinkhorn projection onto the coupling polytope.

    Returns the plan and the dual potentials so successive projections of
    nearby costs can warm-start.
    """
    logp = np.log(p)
    logq = np.log(q)
    if warm is not None:
        f, g = warm[0].copy(), warm[1].copy()
    else:
        f = np.zeros(p.size)
        g = np.zeros(q.size)
    for it in range(n_iters):
        f = epsilon * (logp - logsumexp((g[None, :] - cost) / epsilon, axis=1))
        g = epsilon * (logq - logsumexp((f[:, None] - cost) / epsilon, axis=0))
        if it % 5 == 4:
            t = np.exp((f[:, None] + g[None, :] - cost) / epsilon)
            if np.abs(t.sum(axis=1) - p).max() < tol:
                break
    return np.exp((f[:, None] + g[None, :] - cost) / epsilon), f, g


def _monotone_coupling(
    p: np.ndarray, q: np.ndarray, key_a: np.ndarray, key_b: np.ndarray
) -> np.ndarray:
    """Co-monotone plan between the two point sets ordered by surrogate keys.

    Greedy northwest-corner filling along the sorted orders; feasible for any
    marginals. With permutation-equivalent structures and distinct keys this
    lands directly on the matching permutation, which the quadratic objective
    cannot improve.
    """
    order_a = np.argsort(key_a, kind="stable")
    order_b = np.argsort(key_b, kind="stable")
    t = np.zeros((p.size, q.size))
    rp = p[order_a].copy()
    rq = q[order_b].copy()
    i = j = 0
    while i < p.size and j < q.size:
        mass = min(rp[i], rq[j])
        t[order_a[i], order_b[j]] += mass
        rp[i] -= mass
        rq[j] -= mass
        if rp[i] <= rq[j]:
            i += 1
        if rq[j] < 1e-300:
            j += 1
    return t


def _random_feasible(p: np.ndarray, q: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Seeded random vertex-like plan: northwest-corner fill along random orders.

    Vertex-adjacent starting points explore the non-convex landscape far more
    effectively than dense interior plans, which tend to funnel into the same
    few basins.
    """
    return _monotone_coupling(p, q, rng.random(p.size), rng.random(q.size))


# Permutation rounding + 2-swap descent is applied up to this size; beyond it
# the O(n^4) sweeps stop paying for themselves.
_POLISH_MAX_N = 64


def _polish_permutation(
    c1: np.ndarray, c2: np.ndarray, t: np.ndarray
) -> np.ndarray | None:
    """Round a plan to the nearest permutation and hill-climb with 2-swaps.

    Only meaningful for same-size uniform marginals, where permutation plans
    are polytope vertices. Returns the polished plan, or None when rounding
    does not apply. This is a local search; it does not enumerate the
    permutation group.
    """
    n, m = t.shape
    if n != m or n > _POLISH_MAX_N:
        return None
    _, perm = linear_sum_assignment(-t)

    def perm_cost(idx: np.ndarray) -> float:
        diff = c1 - c2[np.ix_(idx, idx)]
        return float(np.sum(diff * diff))

    cost = perm_cost(perm)
    improved = True
    while improved:
        improved = False
        for i in range(n - 1):
            for j in range(i + 1, n):
                perm[i], perm[j] = perm[j], perm[i]
                candidate = perm_cost(perm)
                if candidate < cost - 1e-15:
                    cost = candidate
                    improved = True
                else:
                    perm[i], perm[j] = perm[j], perm[i]
    plan = np.zeros((n, n))
    plan[np.arange(n), perm] = 1.0 / n
    return plan


def _line_search_tau(a: float, b: float) -> float:
    # minimize a tau^2 + b tau on [0, 1]
    if a > 0:
        return min(1.0, max(0.0, -b / (2.0 * a)))
    return 1.0 if a + b < 0 else 0.0


def _gw_frank_wolfe(
    const_c: np.ndarray,
    c1: np.ndarray,
    c2: np.ndarray,
    p: np.ndarray,
    q: np.ndarray,
    t0: np.ndarray,
    max_iter: int,
    tol: float,
) -> tuple[np.ndarray, int, bool]:
    """Conditional gradient on the quadratic objective with exact line search.

    Each step solves the linearization as an exact transport LP and moves
    along the segment to the polytope vertex; the quadratic restricted to the
    segment is minimized in closed form. Stops when the linearized
    improvement (duality gap) is below tolerance.
    """
    h2 = 2.0 * c2
    t = t0.copy()
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        coupled = c1 @ t @ h2.T
        grad = const_c - 2.0 * coupled
        vertex = _emd(p, q, grad)
        direction = vertex - t
        gap = -float(np.sum(grad * direction))
        loss = float(np.sum((const_c - coupled) * t))
        if gap <= tol * max(1.0, abs(loss)):
            converged = True
            break
        coupled_dir = c1 @ direction @ h2.T
        a = -float(np.sum(coupled_dir * direction))
        b = float(
            np.sum(const_c * direction)
            - np.sum(coupled * direction)
            - np.sum(coupled_dir * t)
        )
        tau = _line_search_tau(a, b)
        if tau <= 0.0:
            converged = True
            break
        t = t + tau * direction
    return t, iterations, converged


def _gw_entropic(
    const_c: np.ndarray,
    c1: np.ndarray,
    c2: np.ndarray,
    p: np.ndarray,
    q: np.ndarray,
    t0: np.ndarray,
    epsilon: float,
    max_iter: int,
    inner_iters: int,
    tol: float,
) -> tuple[np.ndarray, int, bool]:
    """Entropic mirror descent: Sinkhorn projection of successive gradient costs.

    Dual potentials are carried between outer iterations; the gradient cost
    changes slowly, so warm-started projections converge in a few sweeps.
    """
    h2 = 2.0 * c2
    t = t0.copy()
    converged = False
    iterations = 0
    warm: tuple[np.ndarray, np.ndarray] | None = None
    for iterations in range(1, max_iter + 1):
        grad = const_c - c1 @ t @ h2.T
        t_new, f, g = _sinkhorn_log(p, q, grad, epsilon, inner_iters, warm=warm)
        warm = (f, g)
        err = float(np.abs(t_new - t).max())
        t = t_new
        if err < tol:
            converged = True
            break
    return t, iterations, converged


# ---------------------------------------------------------------------------
# Public solver entry points


def gw_distance(
    cost_a: Rdm | np.ndarray,
    cost_b: Rdm | np.ndarray,
    mass_a: MassVector | np.ndarray | None = None,
    mass_b: MassVector | np.ndarray | None = None,
    config: GwSolverConfig | None = None,
    initial_plan: np.ndarray | None = None,
) -> GwResult:
    """Minimize the quadratic structure-matching objective over couplings.

    Masses default to uniform. With ``config.epsilon == 0`` the conditional
    gradient solver is used; otherwise the entropic variant. ``restarts``
    seeded random initializations are run in addition to the deterministic
    ones, and the best plan by exact objective is returned (ties keep the
    earliest initialization). Passing ``initial_plan`` replaces the default
    deterministic initializations, which supports annealing ladders that
    carry the plan across decreasing epsilon values. The reported loss is
    always the unregularized objective of the returned plan.
    """
    cfg = config or GwSolverConfig()
    c1 = _as_cost(cost_a, "gw_distance cost_a")
    c2 = _as_cost(cost_b, "gw_distance cost_b")
    p = _as_mass(mass_a, c1.shape[0], "gw_distance mass_a")
    q = _as_mass(mass_b, c2.shape[0], "gw_distance mass_b")

    # The objective is invariant under transposing the problem, so solve it in
    # a canonical orientation; swapped and unswapped calls then follow the
    # identical optimization path and report identical losses.
    swapped = (c1.shape[0], c1.tobytes(), p.tobytes()) > (
        c2.shape[0],
        c2.tobytes(),
        q.tobytes(),
    )
    if swapped:
        c1, c2 = c2, c1
        p, q = q, p
        if initial_plan is not None:
            initial_plan = np.asarray(initial_plan).T

    const_c = np.add.outer((c1**2) @ p, (c2**2) @ q)
    if initial_plan is not None:
        t0 = np.asarray(initial_plan, dtype=np.float64)
        if t0.shape != (p.size, q.size):
            raise DataError(
                f"gw_distance: initial plan shape {t0.shape} does not match "
                f"({p.size}, {q.size})"
            )
        if (np.abs(t0.sum(axis=1) - p).max() > 1e-6
                or np.abs(t0.sum(axis=0) - q).max() > 1e-6):
            raise DataError("gw_distance: initial plan violates the marginals")
        inits = [t0]
    else:
        inits = [
            _monotone_coupling(p, q, c1 @ p, c2 @ q),
            np.outer(p, q),
        ]
    rng = np.random.default_rng(cfg.seed)
    inits.extend(_random_feasible(p, q, rng) for _ in range(cfg.restarts))

    uniform = (
        p.size == q.size
        and np.abs(p - 1.0 / p.size).max() < 1e-12
        and np.abs(q - 1.0 / q.size).max() < 1e-12
    )
    best: tuple[float, np.ndarray, int, bool] | None = None
    for t0 in inits:
        if cfg.epsilon == 0:
            t, iters, conv = _gw_frank_wolfe(
                const_c, c1, c2, p, q, t0, cfg.max_outer_iters, cfg.tol
            )
        else:
            t, iters, conv = _gw_entropic(
                const_c, c1, c2, p, q, t0, cfg.epsilon,
                cfg.max_outer_iters, cfg.inner_iters, cfg.tol,
            )
        loss = max(0.0, gw_objective(c1, c2, t))
        # Rounding to a permutation and hill-climbing only applies to the
        # exact solver; the entropic variant returns its own fixed point so
        # that annealing ladders stay on a continuous path.
        if uniform and cfg.epsilon == 0:
            polished = _polish_permutation(c1, c2, t)
            if polished is not None:
                polished_loss = max(0.0, gw_objective(c1, c2, polished))
                if polished_loss < loss:
                    t, loss = polished, polished_loss
        if best is None or loss < best[0] - 1e-15:
            best = (loss, t, iters, conv)
        if best[0] <= 1e-13:
            break

    loss, t, iters, conv = best
    if swapped:
        t = t.T
        p, q = q, p
    coupling = Coupling(t=t, p=MassVector(p), q=MassVector(q))
    converged = conv and coupling.marginal_violation() < 1e-6
    return GwResult(
        loss=loss,
        coupling=coupling,
        iterations=iters,
        converged=converged,
        epsilon=cfg.epsilon,
        config=cfg,
    )


def gw_permutation_oracle(cost_a: Rdm | np.ndarray, cost_b: Rdm | np.ndarray) -> float:
    """Exact minimum of the matching objective over permutation couplings.

    Exhaustive enumeration; restricted to n == m <= 8. Permutations are a
    subset of the coupling polytope, so this is an upper bound on the full
    objective.
    """
    c1 = _as_cost(cost_a, "gw_permutation_oracle cost_a")
    c2 = _as_cost(cost_b, "gw_permutation_oracle cost_b")
    n = c1.shape[0]
    if c2.shape[0] != n:
        raise DataError("gw_permutation_oracle: cost matrices must have equal size")
    if n > 8:
        raise DataError("gw_permutation_oracle: exhaustive search limited to n <= 8")
    best = math.inf
    for perm in itertools.permutations(range(n)):
        idx = np.asarray(perm)
        diff = c1 - c2[np.ix_(idx, idx)]
        best = min(best, float(np.sum(diff * diff)))
    return best / (n * n)


def validate_coupling(t: Coupling, tol: float = 1e-6) -> list[Violation]:
    """Diagnose nonnegativity and marginal constraint violations of a plan."""
    violations: list[Violation] = []
    plan = t.t
    neg = np.argwhere(plan < -tol)
    for i, j in neg:
        violations.append(
            Violation(kind="negative_entry", index=(int(i), int(j)),
                      magnitude=float(-plan[i, j]))
        )
    row_err = plan.sum(axis=1) - t.p.w
    for i in np.flatnonzero(np.abs(row_err) > tol):
        violations.append(
            Violation(kind="row_marginal", index=(int(i),), magnitude=float(abs(row_err[i])))
        )
    col_err = plan.sum(axis=0) - t.q.w
    for j in np.flatnonzero(np.abs(col_err) > tol):
        violations.append(
            Violation(kind="col_marginal", index=(int(j),), magnitude=float(abs(col_err[j])))
        )
    return violations
