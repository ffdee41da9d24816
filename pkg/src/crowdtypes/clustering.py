"""Sequential threshold clustering of workers from a shared probe block.

A probe block holds the answers of all n workers to r probe tasks.  Two
workers of the same type agree on a random task more often than two
workers of different types; thresholding the empirical agreement
fraction between the two rates separates the types once r is large
enough.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin
from sklearn.utils.validation import check_array

from .errors import InvalidParameterError, ShapeError


@dataclass(frozen=True)
class ProbeBlock:
    """Dense r x n block of -1/+1 answers: every worker answered every probe task."""

    answers: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.answers, dtype=np.int8)
        object.__setattr__(self, "answers", arr)
        if arr.ndim != 2:
            raise ShapeError("probe block must be 2-d (tasks x workers)")
        if not np.isin(arr, (-1, 1)).all():
            raise InvalidParameterError("probe answers must lie in {-1,+1}")

    @property
    def r(self) -> int:
        return self.answers.shape[0]

    @property
    def n(self) -> int:
        return self.answers.shape[1]


def probe_block_from_answers(answers, task_ids) -> ProbeBlock:
    """Extract the dense probe block for tasks assigned to all workers."""
    return ProbeBlock(answers.dense_block(task_ids))


@dataclass(frozen=True)
class Clustering:
    """Partition of the n workers into clusters with dense ids 1..c."""

    assignments: np.ndarray
    clusters: list
    c: int

    def __post_init__(self):
        assignments = np.asarray(self.assignments, dtype=np.int32)
        object.__setattr__(self, "assignments", assignments)
        if self.c < 1 or assignments.min() < 1 or assignments.max() > self.c:
            raise InvalidParameterError("cluster ids must be dense 1..c")
        if len(self.clusters) != self.c:
            raise ShapeError("need one worker set per cluster id")
        seen = np.zeros(assignments.size, dtype=bool)
        for z, members in enumerate(self.clusters, start=1):
            members = np.asarray(members, dtype=np.int64)
            if not (assignments[members] == z).all():
                raise ShapeError("cluster sets inconsistent with assignments")
            seen[members] = True
        if not seen.all():
            raise ShapeError("clusters must partition all workers")

    @classmethod
    def from_assignments(cls, assignments) -> "Clustering":
        assignments = np.asarray(assignments, dtype=np.int32)
        c = int(assignments.max())
        clusters = [np.flatnonzero(assignments == z) for z in range(1, c + 1)]
        if any(members.size == 0 for members in clusters):
            raise InvalidParameterError("cluster ids must be dense 1..c")
        return cls(assignments, clusters, c)

    @classmethod
    def from_worker_types(cls, worker_types) -> "Clustering":
        """Ground-truth partition: one cluster per type value present."""
        worker_types = np.asarray(worker_types)
        values = np.unique(worker_types)
        assignments = np.searchsorted(values, worker_types) + 1
        return cls.from_assignments(assignments)

    @property
    def n(self) -> int:
        return self.assignments.size

    def sizes(self) -> np.ndarray:
        return np.array([members.size for members in self.clusters], dtype=np.int64)


def partition_equal(a: Clustering, b: Clustering) -> bool:
    """True when both clusterings induce the same partition (ids ignored)."""
    if a.n != b.n:
        return False
    sets_a = {frozenset(members.tolist()) for members in a.clusters}
    sets_b = {frozenset(members.tolist()) for members in b.clusters}
    return sets_a == sets_b


def agreement_fraction(block: ProbeBlock, j: int, j2: int) -> float:
    """Fraction of probe tasks on which workers j and j2 gave equal answers."""
    if j == j2:
        raise InvalidParameterError("agreement fraction needs two distinct workers")
    col = block.answers[:, j].astype(np.int64)
    col2 = block.answers[:, j2].astype(np.int64)
    # matches - mismatches = dot, matches + mismatches = r
    return float((block.r + col @ col2) / (2 * block.r))


def agreement_matrix(block: ProbeBlock) -> np.ndarray:
    """All pairwise agreement fractions (diagonal fixed at 1)."""
    s = block.answers.astype(np.float32)
    dot = s.T @ s
    return (block.r + dot) / (2.0 * block.r)


def cluster_sequential(block: ProbeBlock, zeta: float) -> Clustering:
    """Greedy clustering: worker j joins the first cluster (in creation
    order) whose every member agrees with j above zeta, else starts a new one."""
    if not (0.0 < zeta < 1.0):
        raise InvalidParameterError(f"zeta must lie in (0,1), got {zeta}")
    agree = agreement_matrix(block)
    n = block.n
    assignments = np.zeros(n, dtype=np.int32)
    members_of: list[list[int]] = []
    for j in range(n):
        for z, members in enumerate(members_of, start=1):
            if agree[j, members].min() > zeta:
                members.append(j)
                assignments[j] = z
                break
        else:
            members_of.append([j])
            assignments[j] = len(members_of)
    clusters = [np.array(ms, dtype=np.int64) for ms in members_of]
    return Clustering(assignments, clusters, len(clusters))


class ThresholdWorkerClusterer(ClusterMixin, BaseEstimator):
    """Scikit-learn style wrapper around :func:`cluster_sequential`.

    Parameters
    ----------
    zeta : float
        Agreement threshold in (0,1).  Use the midpoint of the same-type
        and cross-type agreement probabilities when (p, q, d) are known
        (see budgets.stage1_recommendation).
    """

    def __init__(self, zeta: float = 0.5):
        self.zeta = zeta

    def fit(self, X, y=None):
        """Cluster workers given X of shape (n_workers, n_probe_tasks)."""
        X = check_array(X, dtype=np.int8)
        block = ProbeBlock(X.T)
        clustering = cluster_sequential(block, self.zeta)
        self.clustering_ = clustering
        self.labels_ = clustering.assignments.copy()
        self.n_clusters_ = clustering.c
        return self
