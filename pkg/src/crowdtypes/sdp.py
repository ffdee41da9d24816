"""Worker clustering by semidefinite relaxation of the similarity matrix.

Pipeline: build A = S^T S from the probe block (diagonal zeroed), read
the within/cross edge-density scale off the top two eigenvalues, solve

    maximize  <A - lambda * ones, X>
    s.t.      X PSD,  trace(X) = n,  0 <= X_ij <= 1

with a first-order splitting method, then round the solution's rows to
an explicit partition with an approximate k-medoids pass.  Requires no
knowledge of the reliability parameters.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin
from sklearn.metrics import pairwise_distances
from sklearn.utils.validation import check_array

from .clustering import Clustering, ProbeBlock
from .errors import InvalidParameterError, NumericalFailureError, ShapeError
from .model import ModelParams, pairwise_product_rates
from .rng import substream


def similarity_matrix(block: ProbeBlock) -> np.ndarray:
    """A = S^T S with a zeroed diagonal (n x n, symmetric, |A_ij| <= r)."""
    s = block.answers.astype(np.int64)
    a = s.T @ s
    np.fill_diagonal(a, 0)
    return a


def _round_robin_rounds(n: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Round-robin schedule: n-1 rounds of disjoint index pairs covering
    every (p, q) once (a dummy index pads odd n)."""
    players = list(range(n)) + ([-1] if n % 2 else [])
    k = len(players)
    rounds = []
    order = players[:]
    for _ in range(k - 1):
        left = order[: k // 2]
        right = order[k // 2:][::-1]
        ps, qs = [], []
        for x, y in zip(left, right):
            if x < 0 or y < 0:
                continue
            ps.append(min(x, y))
            qs.append(max(x, y))
        rounds.append((np.array(ps), np.array(qs)))
        order = [order[0]] + [order[-1]] + order[1:-1]
    return rounds


def jacobi_eigh(a: np.ndarray, tol: float = 1e-10, max_sweeps: int = 60):
    """Full symmetric eigendecomposition by Jacobi rotations.

    One sweep visits every index pair once, in round-robin rounds of
    disjoint pairs so each round is applied as a single vectorized
    two-sided rotation.  Sweeps stop once the off-diagonal Frobenius
    mass drops below tol * ||A||_F.  Returns (eigenvalues descending,
    eigenvectors as columns).  Intended for the moderate n of worker
    similarity matrices.
    """
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ShapeError("matrix must be square")
    if not np.allclose(a, a.T, rtol=0, atol=1e-12 * max(1.0, np.abs(a).max())):
        raise ShapeError("matrix must be symmetric")
    n = a.shape[0]
    w = 0.5 * (a + a.T)
    v = np.eye(n)
    norm = np.linalg.norm(w)
    if n == 1 or norm == 0.0:
        order = np.argsort(np.diag(w))[::-1]
        return np.diag(w)[order], v[:, order]

    def offdiag(mat):
        # computed from the strict upper triangle; the difference
        # ||M||^2 - sum(diag^2) cancels catastrophically near convergence
        upper = mat[np.triu_indices(mat.shape[0], k=1)]
        return np.sqrt(2.0) * np.linalg.norm(upper)

    rounds = _round_robin_rounds(n)
    for _ in range(max_sweeps):
        if offdiag(w) < tol * norm:
            break
        for ps, qs in rounds:
            apq = w[ps, qs]
            active = np.abs(apq) > 0.0
            if not active.any():
                continue
            ps_a, qs_a, apq = ps[active], qs[active], apq[active]
            # inner rotation (|theta| <= pi/4) keeps the parallel
            # ordering convergent
            tau = (w[qs_a, qs_a] - w[ps_a, ps_a]) / (2.0 * apq)
            sign = np.where(tau >= 0.0, 1.0, -1.0)
            t = sign / (np.abs(tau) + np.sqrt(1.0 + tau * tau))
            co = 1.0 / np.sqrt(1.0 + t * t)
            si = t * co
            wp = w[:, ps_a] * co - w[:, qs_a] * si
            wq = w[:, ps_a] * si + w[:, qs_a] * co
            w[:, ps_a] = wp
            w[:, qs_a] = wq
            wp = w[ps_a, :] * co[:, None] - w[qs_a, :] * si[:, None]
            wq = w[ps_a, :] * si[:, None] + w[qs_a, :] * co[:, None]
            w[ps_a, :] = wp
            w[qs_a, :] = wq
            w[ps_a, qs_a] = 0.0
            w[qs_a, ps_a] = 0.0
            vp = v[:, ps_a] * co - v[:, qs_a] * si
            vq = v[:, ps_a] * si + v[:, qs_a] * co
            v[:, ps_a] = vp
            v[:, qs_a] = vq
    else:
        raise NumericalFailureError(
            f"jacobi sweeps did not reach off-diagonal tolerance {tol}"
        )
    vals = np.diag(w).copy()
    order = np.argsort(vals)[::-1]
    return vals[order], v[:, order]


def top_two_eigenvalues(a: np.ndarray, tol: float = 1e-10) -> tuple[float, float]:
    """The two algebraically largest eigenvalues of a symmetric matrix."""
    a = np.asarray(a, dtype=np.float64)
    if a.shape[0] < 2:
        raise InvalidParameterError("need n >= 2 for two eigenvalues")
    vals, _ = jacobi_eigh(a, tol=tol)
    return float(vals[0]), float(vals[1])


@dataclass(frozen=True)
class EdgeDensityEstimates:
    """Spectral estimates of the similarity scale.

    p_hat_c = (lambda1 + (d-1) lambda2) / (n - d) estimates the
    within-cluster edge density, q_hat_c = (lambda1 - lambda2)/n the
    cross-cluster one; their midpoint tunes the SDP objective shift.
    """

    lambda1: float
    lambda2: float
    p_hat_c: float
    q_hat_c: float

    def __post_init__(self):
        if self.lambda2 > self.lambda1:
            raise InvalidParameterError("lambda1 must dominate lambda2")
        if not np.isfinite(self.lambda_tune):
            raise InvalidParameterError("tuning parameter must be finite")

    @property
    def lambda_tune(self) -> float:
        return 0.5 * (self.p_hat_c + self.q_hat_c)


def estimate_edge_densities(a: np.ndarray, d: int, tol: float = 1e-10) -> EdgeDensityEstimates:
    """Apply the spectral density formulas to a similarity matrix."""
    a = np.asarray(a, dtype=np.float64)
    n = a.shape[0]
    if n <= d:
        raise InvalidParameterError(f"need n > d, got n={n}, d={d}")
    lam1, lam2 = top_two_eigenvalues(a, tol=tol)
    p_hat_c = (lam1 + (d - 1) * lam2) / (n - d)
    q_hat_c = (lam1 - lam2) / n
    return EdgeDensityEstimates(lam1, lam2, p_hat_c, q_hat_c)


def density_constants(params: ModelParams) -> tuple[float, float]:
    """Population within/cross edge densities (p_m, p_u) per shared task."""
    return pairwise_product_rates(params)


def tuning_window(params: ModelParams, r: int) -> tuple[float, float]:
    """Admissible range for the SDP tuning parameter at probe depth r."""
    p_m, p_u = density_constants(params)
    return (0.25 * r * p_m + 0.75 * r * p_u, 0.75 * r * p_m + 0.25 * r * p_u)


def consistency_probe_tasks(params: ModelParams, n: int, c1: float = 1.0) -> int:
    """Probe depth r = c1 * d^2 (ln n)^2 / (p_m - p_u)^2 for exact recovery."""
    p_m, p_u = density_constants(params)
    return int(np.ceil(c1 * params.d ** 2 * np.log(n) ** 2 / (p_m - p_u) ** 2))


@dataclass(frozen=True)
class SdpSolverConfig:
    """First-order solver settings (exposed through the harness config)."""

    penalty: float = 1.0
    tolerance: float = 1e-4
    max_iterations: int = 2000
    jacobi_tolerance: float = 1e-10

    def __post_init__(self):
        if self.penalty <= 0 or self.tolerance <= 0 or self.max_iterations < 1:
            raise InvalidParameterError("solver settings must be positive")


@dataclass
class SdpSolution:
    """Approximate maximizer plus convergence diagnostics."""

    matrix: np.ndarray
    iterations: int
    primal_residual: float
    dual_residual: float
    converged: bool
    objective: float
    best_objective_trace: np.ndarray = field(repr=False, default=None)

    BOX_TOL = 1e-6
    TRACE_TOL = 1e-4
    EIG_TOL = 1e-6

    def check_feasibility(self) -> None:
        n = self.matrix.shape[0]
        x = self.matrix
        if x.min() < -self.BOX_TOL or x.max() > 1 + self.BOX_TOL:
            raise NumericalFailureError("solution violates the box constraint")
        if abs(np.trace(x) - n) > self.TRACE_TOL * n:
            raise NumericalFailureError("solution violates the trace constraint")
        if np.linalg.eigvalsh(x).min() < -self.EIG_TOL * n:
            raise NumericalFailureError("solution violates positive semidefiniteness")


def _project_simplex_scaled(vals: np.ndarray, total: float) -> np.ndarray:
    """Euclidean projection of vals onto {x >= 0, sum x = total}."""
    mu = np.sort(vals)[::-1]
    cum = np.cumsum(mu) - total
    idx = np.arange(1, vals.size + 1)
    rho = np.max(np.flatnonzero(mu - cum / idx > 0))
    theta = cum[rho] / (rho + 1)
    return np.maximum(vals - theta, 0.0)


def _project_psd_trace(mat: np.ndarray, total: float) -> np.ndarray:
    """Projection onto the PSD cone intersected with trace == total.

    Uses LAPACK eigh here: this projection runs once per solver
    iteration, where the cyclic Jacobi routine would dominate runtime.
    """
    sym = 0.5 * (mat + mat.T)
    vals, vecs = np.linalg.eigh(sym)
    vals = _project_simplex_scaled(vals, total)
    return (vecs * vals) @ vecs.T


def solve_sdp(a: np.ndarray, lambda_tune: float, config: SdpSolverConfig | None = None) -> SdpSolution:
    """Approximately solve the cluster-matrix SDP by operator splitting.

    Alternates a PSD-with-fixed-trace projection against a box
    projection with scaled dual updates; the returned matrix is polished
    so that the box constraint is exact and trace/eigenvalue violations
    sit inside the documented tolerances even on early termination.
    """
    config = config or SdpSolverConfig()
    a = np.asarray(a, dtype=np.float64)
    n = a.shape[0]
    if a.ndim != 2 or a.shape[1] != n:
        raise ShapeError("similarity matrix must be square")
    if not np.allclose(a, a.T, rtol=0, atol=1e-9 * max(1.0, np.abs(a).max())):
        raise ShapeError("similarity matrix must be symmetric")
    c_obj = a - lambda_tune
    scale = np.linalg.norm(c_obj)
    c_scaled = c_obj / scale if scale > 0 else np.zeros_like(c_obj)
    rho = config.penalty

    x = np.eye(n)
    z = np.eye(n)
    u = np.zeros((n, n))
    best_obj = -np.inf
    best_z = z.copy()
    trace = []
    primal = dual = np.inf
    converged = False
    iterations = 0
    for k in range(config.max_iterations):
        iterations = k + 1
        x = _project_psd_trace(z - u + c_scaled / rho, float(n))
        z_prev = z
        z = np.clip(x + u, 0.0, 1.0)
        u = u + x - z
        obj = float((c_obj * z).sum())
        if obj > best_obj:
            best_obj = obj
            best_z = z.copy()
        trace.append(best_obj)
        primal = np.linalg.norm(x - z) / n
        dual = rho * np.linalg.norm(z - z_prev) / n
        if primal < config.tolerance and dual < config.tolerance:
            converged = True
            break

    candidate = z if converged else best_z
    polished = _polish_feasible(candidate)
    solution = SdpSolution(
        matrix=polished,
        iterations=iterations,
        primal_residual=float(primal),
        dual_residual=float(dual),
        converged=converged,
        objective=float((c_obj * polished).sum()),
        best_objective_trace=np.asarray(trace),
    )
    solution.check_feasibility()
    return solution


def _polish_feasible(x: np.ndarray, max_rounds: int = 500) -> np.ndarray:
    """Alternate PSD/trace and box projections until inside tolerances.

    Ends on a box projection so the box constraint holds exactly; the
    loop runs until the trace and minimum-eigenvalue slack fit the
    SdpSolution tolerances.
    """
    n = x.shape[0]
    cur = np.clip(0.5 * (x + x.T), 0.0, 1.0)
    for _ in range(max_rounds):
        eig_min = np.linalg.eigvalsh(cur).min()
        trace_err = abs(np.trace(cur) - n)
        if eig_min >= -SdpSolution.EIG_TOL * n and trace_err <= SdpSolution.TRACE_TOL * n:
            return cur
        cur = np.clip(_project_psd_trace(cur, float(n)), 0.0, 1.0)
    raise NumericalFailureError("feasibility polish did not converge")


def extract_clusters_kmedoids(x, d: int, seed: int, max_sweeps: int = 20) -> Clustering:
    """Round the SDP solution into d clusters.

    Rows are treated as points under the L1 distance; medoids start
    farthest-first from a seeded random point and are refined by
    alternating assignment and medoid-update sweeps.
    """
    matrix = x.matrix if isinstance(x, SdpSolution) else np.asarray(x, dtype=np.float64)
    n = matrix.shape[0]
    if d > n:
        raise InvalidParameterError(f"cannot extract d={d} clusters from n={n} workers")
    if d < 1:
        raise InvalidParameterError("d must be >= 1")
    dist = pairwise_distances(matrix, metric="manhattan")
    rng = substream(seed, "kmedoids")
    medoids = [int(rng.integers(n))]
    for _ in range(d - 1):
        gap = dist[:, medoids].min(axis=1)
        gap[medoids] = -1.0
        medoids.append(int(np.argmax(gap)))
    medoids = np.array(medoids)

    def assign(meds):
        lab = np.argmin(dist[:, meds], axis=1)
        lab[meds] = np.arange(meds.size)  # a medoid always owns itself
        return lab

    labels = assign(medoids)
    for _ in range(max_sweeps):
        new_medoids = medoids.copy()
        for z in range(d):
            members = np.flatnonzero(labels == z)
            within = dist[np.ix_(members, members)].sum(axis=0)
            new_medoids[z] = members[np.argmin(within)]
        new_labels = assign(new_medoids)
        if np.array_equal(new_medoids, medoids) and np.array_equal(new_labels, labels):
            break
        medoids, labels = new_medoids, new_labels
    return Clustering.from_assignments(labels + 1)


def cluster_workers_sdp(
    block: ProbeBlock,
    d: int,
    seed: int,
    config: SdpSolverConfig | None = None,
) -> tuple[Clustering, EdgeDensityEstimates]:
    """Full pipeline: similarity, density estimates, SDP, k-medoids."""
    config = config or SdpSolverConfig()
    a = similarity_matrix(block)
    if d == 1:
        densities = estimate_edge_densities(a, d, tol=config.jacobi_tolerance)
        ones = Clustering.from_assignments(np.ones(block.n, dtype=np.int32))
        return ones, densities
    densities = estimate_edge_densities(a, d, tol=config.jacobi_tolerance)
    solution = solve_sdp(a, densities.lambda_tune, config)
    clustering = extract_clusters_kmedoids(solution, d, seed)
    return clustering, densities


class SdpWorkerClusterer(ClusterMixin, BaseEstimator):
    """Scikit-learn style wrapper around :func:`cluster_workers_sdp`.

    Parameters
    ----------
    n_clusters : int
        Number of worker types to extract.
    random_state : int
        Seed for the medoid initialisation.
    penalty, tolerance, max_iterations, jacobi_tolerance : solver settings.
    """

    def __init__(
        self,
        n_clusters: int = 2,
        random_state: int = 0,
        penalty: float = 1.0,
        tolerance: float = 1e-4,
        max_iterations: int = 2000,
        jacobi_tolerance: float = 1e-10,
    ):
        self.n_clusters = n_clusters
        self.random_state = random_state
        self.penalty = penalty
        self.tolerance = tolerance
        self.max_iterations = max_iterations
        self.jacobi_tolerance = jacobi_tolerance

    def fit(self, X, y=None):
        """Cluster workers given X of shape (n_workers, n_probe_tasks)."""
        X = check_array(X, dtype=np.int8)
        config = SdpSolverConfig(
            penalty=self.penalty,
            tolerance=self.tolerance,
            max_iterations=self.max_iterations,
            jacobi_tolerance=self.jacobi_tolerance,
        )
        block = ProbeBlock(X.T)
        clustering, densities = cluster_workers_sdp(
            block, self.n_clusters, self.random_state, config
        )
        self.clustering_ = clustering
        self.labels_ = clustering.assignments.copy()
        self.n_clusters_ = clustering.c
        self.edge_densities_ = densities
        return self
