"""Community recovery by relaxed K-means followed by K-medoids rounding.

The relaxed program maximises ``<X X^T, B>`` over symmetric matrices with
``trace(B) = K``, ``B 1 = 1`` and ``0 <= B <= beta`` (plus ``B >= 0`` in the
PSD sense unless ``psd=False``).  It is solved with a two-block ADMM: one
block is the exact Euclidean projection onto the affine (or spectrahedral)
set, the other is a clip onto the box.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh
from scipy.spatial.distance import cdist

from .errors import ConvergenceError, FeasibilityError, InputError
from .model import Labeling, OrderedGraph

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-6
DEFAULT_OPT_TOL = 1e-6
# rounding only needs the block pattern of B, which settles long before the objective
CLUSTER_OPT_TOL = 1e-4
DEFAULT_MAX_ITER = 20000
DEFAULT_RESTARTS = 10


@dataclass
class RelaxedSolution:
    B: np.ndarray
    objective: float
    residuals: dict
    iterations: int
    objective_history: list = field(default_factory=list, repr=False)

    def feasible(self, tol: float) -> bool:
        return max(self.residuals.values()) <= tol


@dataclass
class ClusterResult:
    labels: Labeling
    medoid_rows: np.ndarray
    assignment_cost: float
    relaxed: RelaxedSolution | None = field(default=None, repr=False)


def beta_hat(graph: OrderedGraph, K: int) -> float:
    """Data-driven box bound ``min((K^3 / n) exp(2 n d_X), 1)``."""
    n = graph.n
    if n < 2:
        raise InputError("beta_hat needs at least two nodes")
    d = graph.density()
    log_value = 3 * math.log(K) - math.log(n) + 2 * n * d
    return 1.0 if log_value >= 0 else math.exp(log_value)


def residuals(B: np.ndarray, K: int, beta: float) -> dict:
    n = B.shape[0]
    return {
        "trace": abs(float(np.trace(B)) - K),
        "row_sum": float(np.abs(B.sum(axis=1) - 1).max()),
        "box": float(max(0.0, -B.min(), B.max() - beta)),
        "symmetry": float(np.abs(B - B.T).max()) if n else 0.0,
    }


def _project_simplex(v: np.ndarray, total: float) -> np.ndarray:
    """Euclidean projection of ``v`` onto ``{w >= 0, sum(w) = total}``."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - total
    idx = np.arange(1, v.size + 1)
    cond = u - css / idx > 0
    r = idx[cond][-1]
    theta = css[cond][-1] / r
    return np.maximum(v - theta, 0.0)


class _Spectrahedron:
    """Projection onto ``{B sym : B 1 = 1, tr B = K, B psd}``.

    Every such ``B`` is ``J/n + V`` with ``V psd``, ``V 1 = 0`` and
    ``tr V = K - 1``, so the projection reduces to an eigenvalue projection of
    the doubly-centred input onto a scaled simplex.  Only the leading
    eigenpairs are computed; the window grows until it contains the cut-off.
    """

    def __init__(self, n: int, K: int):
        self.n = n
        self.K = K
        self.rank = min(K + 4, n - 1)

    def __call__(self, M: np.ndarray) -> np.ndarray:
        n, K = self.n, self.K
        row = M.mean(axis=1)
        C = M - row[:, None] - row[None, :] + row.mean()
        # push the all-ones direction far below every other eigenvalue
        C -= (np.abs(C).sum() + 1.0) / n
        r = self.rank
        while True:
            w, V = eigh(C, subset_by_index=[n - r, n - 1], driver="evr")
            lam = _project_simplex(w, K - 1)
            if lam[0] == 0 or r >= n - 1:
                break
            r = min(2 * r, n - 1)
        keep = lam > 0
        self.rank = min(max(K + 4, int(keep.sum()) + 4), n - 1)
        Vk = V[:, keep]
        return (Vk * lam[keep]) @ Vk.T + 1.0 / n


class _AffineSet:
    """Projection onto ``{B sym : B 1 = 1, tr B = K}`` (closed form)."""

    def __init__(self, n: int, K: int):
        self.n = n
        self.K = K
        self.eye = np.eye(n)

    def __call__(self, M: np.ndarray) -> np.ndarray:
        n, K = self.n, self.K
        M = (M + M.T) / 2
        r = M.sum(axis=1)
        s = r.sum()
        nu = (K - np.trace(M) - (n - s) / n) / (n - 1)
        lam_sum = (n - s) / n - nu
        lam = (2.0 / n) * (1.0 - r - nu) - lam_sum / n
        return M + (lam[:, None] + lam[None, :]) / 2 + nu * self.eye


def _interior_point(n: int, K: int) -> np.ndarray:
    """Feasible ``a I + b J / n`` with rows summing to 1 and trace ``K``.

    Its largest entry is ``K / n``, so it lies in the box for every admissible
    ``beta``; it is positive semidefinite with eigenvalues ``a`` and ``1``.
    """
    a = (K - 1) / (n - 1) if n > 1 else 1.0
    return a * np.eye(n) + (1 - a) / n


def _repair(X: np.ndarray, K: int, beta: float) -> np.ndarray:
    """Pull ``X`` (exact on the affine/PSD part) towards the interior point until
    the box holds; the result is the feasible point of the segment closest to ``X``."""
    n = X.shape[0]
    B0 = _interior_point(n, K)
    t = 0.0
    low = X < 0
    if low.any():
        t = max(t, float(np.max(-X[low] / (B0[low] - X[low]))))
    high = X > beta
    if high.any():
        t = max(t, float(np.max((X[high] - beta) / (X[high] - B0[high]))))
    if t == 0.0:
        return X
    t = min(1.0, t * (1 + 1e-9) + 1e-15)
    return (1 - t) * X + t * B0


def _admm(A, K, beta, opt_tol, max_iter, psd, rho=0.1, relax=1.6, adapt_every=10):
    n = A.shape[0]
    scale = np.linalg.norm(A)
    Ahat = A / scale if scale > 0 else A
    project = _Spectrahedron(n, K) if psd else _AffineSet(n, K)
    Z = np.full((n, n), 1.0 / n)
    U = np.zeros((n, n))
    history = []
    X = Z
    for it in range(1, max_iter + 1):
        X = project(Z - U + Ahat / rho)
        Xr = relax * X + (1 - relax) * Z
        Z_old = Z
        Z = np.clip(Xr + U, 0.0, beta)
        U += Xr - Z
        history.append(float((A * X).sum()))
        primal = float(np.abs(X - Z).max())
        dual = rho * float(np.abs(Z - Z_old).max())
        if primal <= opt_tol and dual <= opt_tol:
            return X, it, history, primal, dual
        if it % adapt_every == 0:
            if primal > 5 * dual:
                rho *= 2
                U /= 2
            elif dual > 5 * primal:
                rho /= 2
                U *= 2
    raise ConvergenceError(
        f"relaxed K-means did not converge in {max_iter} iterations",
        residuals={"primal": primal, "dual": dual, **residuals(X, K, beta)},
        iterations=max_iter,
    )


def _highs(A, K, beta):
    from scipy import sparse
    from scipy.optimize import linprog

    n = A.shape[0]
    iu, ju = np.triu_indices(n)
    on_diag = iu == ju
    c = -np.where(on_diag, 1.0, 2.0) * A[iu, ju]
    idx = np.arange(iu.size)
    rows = np.concatenate([iu, np.where(on_diag, n, ju)])
    cols = np.concatenate([idx, idx])
    A_eq = sparse.csr_matrix((np.ones(rows.size), (rows, cols)), shape=(n + 1, iu.size))
    b_eq = np.r_[np.ones(n), K]
    res = linprog(c, A_eq=A_eq, b_eq=b_eq, bounds=(0, beta), method="highs")
    if res.status != 0:
        raise ConvergenceError(f"HiGHS failed: {res.message}")
    B = np.zeros((n, n))
    B[iu, ju] = res.x
    B = B + B.T - np.diag(np.diag(B))
    return B, int(getattr(res, "nit", 0) or 0)


def solve_relaxed_kmeans(
    graph: OrderedGraph,
    K: int,
    beta: float,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    psd: bool = True,
    backend: str = "auto",
    opt_tol: float = DEFAULT_OPT_TOL,
) -> RelaxedSolution:
    """Maximise ``<X X^T, B>`` over the relaxed K-means set.

    ADMM stops once its primal and dual residuals (on the Frobenius-normalised
    objective) fall below ``opt_tol``; the iterate is then pulled onto the
    feasible set, so the returned residuals are checked against ``tol``.
    ``backend="highs"`` solves the linear program (``psd=False`` only) with
    scipy's HiGHS; ``"auto"`` picks HiGHS for the linear program, where ADMM
    crawls on the degenerate vertex solutions, and ADMM otherwise.
    """
    n = graph.n
    if not 1 <= K <= n:
        raise InputError(f"need 1 <= K <= n, got K={K}, n={n}")
    if tol <= 0 or opt_tol <= 0:
        raise InputError("tolerances must be positive")
    if beta > 1 or beta < K / n * (1 - 1e-12):
        raise FeasibilityError(f"beta={beta} outside [K/n, 1] = [{K / n}, 1]")
    beta = max(beta, K / n)
    X = graph.adjacency.astype(float)
    A = X @ X
    if K == 1:
        B = np.full((n, n), 1.0 / n)
        return RelaxedSolution(B, float((A * B).sum()), residuals(B, K, beta), 0, [])
    if backend == "auto":
        backend = "admm" if psd else "highs"
    if backend == "highs":
        if psd:
            raise InputError("the HiGHS backend only solves the psd=False relaxation")
        B, iterations = _highs(A, K, beta)
        history = [float((A * B).sum())]
    elif backend == "admm":
        B, iterations, history, _, _ = _admm(A, K, beta, opt_tol, max_iter, psd)
    else:
        raise InputError(f"unknown backend {backend!r}")
    B = _repair((B + B.T) / 2, K, beta)
    res = residuals(B, K, beta)
    if max(res.values()) > tol:
        raise ConvergenceError("solution violates the feasibility tolerance", residuals=res, iterations=iterations)
    return RelaxedSolution(B, float((A * B).sum()), res, iterations, history)


def _local_search(D: np.ndarray, medoids: np.ndarray) -> tuple[np.ndarray, float]:
    """Best-improvement swap search from an initial set of medoid rows."""
    n = D.shape[0]
    K = medoids.size
    cost = D[:, medoids].min(axis=1).sum()
    while True:
        dm = D[:, medoids]
        best_cost, best_swap = cost, None
        for a in range(K):
            others = np.delete(dm, a, axis=1)
            base = others.min(axis=1) if K > 1 else np.full(n, np.inf)
            costs = np.minimum(base[:, None], D).sum(axis=0)
            costs[medoids] = np.inf
            o = int(np.argmin(costs))
            if costs[o] < best_cost - 1e-12 * max(1.0, abs(best_cost)):
                best_cost, best_swap = costs[o], (a, o)
        if best_swap is None:
            return medoids, float(cost)
        a, o = best_swap
        medoids = medoids.copy()
        medoids[a] = o
        cost = best_cost


def round_kmedoids(B: np.ndarray, K: int, restarts: int = DEFAULT_RESTARTS, seed=None) -> ClusterResult:
    """K-medoids on the rows of ``B`` under the element-wise L1 distance.

    Each restart starts from ``K`` distinct random rows and runs swap local
    search; the cheapest restart wins (ties: lowest restart index). Nodes are
    assigned to the nearest medoid, ties to the lowest medoid row index, and
    cluster ids follow the medoids' row order.
    """
    B = np.asarray(B, dtype=float)
    n = B.shape[0]
    if K > n:
        raise InputError(f"K={K} exceeds the number of rows {n}")
    if K < 1 or restarts < 1:
        raise InputError("K and restarts must be positive")
    D = cdist(B, B, metric="cityblock")
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(restarts):
        init = rng.choice(n, size=K, replace=False)
        medoids, cost = _local_search(D, init)
        if best is None or cost < best[1]:
            best = (medoids, cost)
    medoids = np.sort(best[0])
    labels = np.argmin(D[:, medoids], axis=1)
    cost = float(D[np.arange(n), medoids[labels]].sum())
    return ClusterResult(Labeling(labels, K), medoids, cost)


def cluster(
    graph: OrderedGraph,
    K: int,
    seed=None,
    beta: float | None = None,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    restarts: int = DEFAULT_RESTARTS,
    psd: bool = True,
    opt_tol: float = CLUSTER_OPT_TOL,
) -> ClusterResult:
    """Estimate communities: beta_hat, relaxed K-means, K-medoids rounding.

    The relaxation is solved to the looser ``CLUSTER_OPT_TOL`` by default;
    the rounded labels are insensitive to the last digits of the objective.
    """
    n = graph.n
    if K == 1:
        return ClusterResult(Labeling(np.zeros(n, dtype=int), 1), np.array([0]), 0.0)
    if beta is None:
        beta = beta_hat(graph, K)
    sol = solve_relaxed_kmeans(graph, K, beta, tol=tol, max_iter=max_iter, psd=psd, opt_tol=opt_tol)
    result = round_kmedoids(sol.B, K, restarts=restarts, seed=seed)
    result.relaxed = sol
    return result
