"""Ground-truth sampling, task assignment, and noisy answer generation.

The generative model: every task and every worker carries one of ``d``
types, drawn independently and uniformly.  A worker answers a task
correctly with probability ``p`` when their types match and with
probability ``q`` otherwise (``1/2 <= q < p <= 1``).  Answers are
binary, coded as -1/+1; an absent answer is coded as 0 and represented
here by absence from the sparse answer matrix.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .errors import InvalidAssignmentError, InvalidParameterError, ShapeError
from .rng import substream


@dataclass(frozen=True)
class ModelParams:
    """Reliability model: d types, matched accuracy p, unmatched accuracy q."""

    d: int
    p: float
    q: float

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 1:
            raise InvalidParameterError(f"d must be an integer >= 1, got {self.d}")
        object.__setattr__(self, "d", int(self.d))
        if not (0.5 <= self.q < self.p <= 1.0):
            raise InvalidParameterError(
                f"need 1/2 <= q < p <= 1, got p={self.p}, q={self.q}"
            )

    def fidelity(self, matched) -> np.ndarray:
        """Per-pair correctness probability: p where matched, else q."""
        return np.where(np.asarray(matched, dtype=bool), self.p, self.q)


@dataclass(frozen=True)
class World:
    """Ground truth: task labels in {-1,+1}, task/worker types in 1..d."""

    labels: np.ndarray
    task_types: np.ndarray
    worker_types: np.ndarray

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int8)
        task_types = np.asarray(self.task_types, dtype=np.int32)
        worker_types = np.asarray(self.worker_types, dtype=np.int32)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "task_types", task_types)
        object.__setattr__(self, "worker_types", worker_types)
        if labels.ndim != 1 or task_types.ndim != 1 or worker_types.ndim != 1:
            raise ShapeError("world fields must be 1-d arrays")
        if labels.size < 1 or worker_types.size < 1:
            raise InvalidParameterError("need at least one task and one worker")
        if labels.size != task_types.size:
            raise ShapeError("labels and task_types must have equal length")
        if not np.isin(labels, (-1, 1)).all():
            raise InvalidParameterError("labels must lie in {-1,+1}")
        for name, arr in (("task_types", task_types), ("worker_types", worker_types)):
            if arr.min(initial=1) < 1:
                raise InvalidParameterError(f"{name} must lie in 1..d")

    @property
    def m(self) -> int:
        return self.labels.size

    @property
    def n(self) -> int:
        return self.worker_types.size


@dataclass(frozen=True)
class AssignmentPlan:
    """Per-task lists of assigned worker indices (0-based, no duplicates)."""

    task_ids: np.ndarray
    workers: list

    def __post_init__(self):
        task_ids = np.asarray(self.task_ids, dtype=np.int64)
        object.__setattr__(self, "task_ids", task_ids)
        if task_ids.size != len(self.workers):
            raise ShapeError("one worker list per task id required")
        norm = []
        for ws in self.workers:
            ws = np.asarray(ws, dtype=np.int64)
            if ws.size != np.unique(ws).size:
                raise InvalidAssignmentError("duplicate workers assigned to one task")
            norm.append(ws)
        object.__setattr__(self, "workers", norm)

    @property
    def total_queries(self) -> int:
        return int(sum(ws.size for ws in self.workers))


class AnswerMatrix:
    """Sparse m x n matrix of -1/+1 answers; unassigned pairs are absent.

    Stored row-compressed: per-task worker indices are strictly increasing,
    so the assigned set of task i is exactly the stored indices of row i.
    """

    def __init__(self, m: int, n: int, task_ptr, workers, values):
        self.m = int(m)
        self.n = int(n)
        self.task_ptr = np.asarray(task_ptr, dtype=np.int64)
        self.workers = np.asarray(workers, dtype=np.int64)
        self.values = np.asarray(values, dtype=np.int8)
        if self.task_ptr.shape != (self.m + 1,):
            raise ShapeError("task_ptr must have length m+1")
        if self.workers.shape != self.values.shape:
            raise ShapeError("workers and values must align")
        if self.values.size and not np.isin(self.values, (-1, 1)).all():
            raise InvalidParameterError("stored answers must lie in {-1,+1}")
        if self.workers.size:
            if self.workers.min() < 0 or self.workers.max() >= self.n:
                raise ShapeError("worker index out of range")
        for i in range(self.m):
            row = self.workers[self.task_ptr[i]:self.task_ptr[i + 1]]
            if row.size > 1 and not (np.diff(row) > 0).all():
                raise InvalidAssignmentError(
                    f"task {i}: worker indices must be strictly increasing"
                )

    @classmethod
    def from_plan(cls, m: int, n: int, plan: AssignmentPlan, values_per_task) -> "AnswerMatrix":
        counts = np.zeros(m, dtype=np.int64)
        rows: list = [None] * m
        for tid, ws, vs in zip(plan.task_ids, plan.workers, values_per_task):
            order = np.argsort(ws, kind="stable")
            rows[tid] = (ws[order], np.asarray(vs, dtype=np.int8)[order])
            counts[tid] = ws.size
        ptr = np.zeros(m + 1, dtype=np.int64)
        np.cumsum(counts, out=ptr[1:])
        workers = np.empty(ptr[-1], dtype=np.int64)
        values = np.empty(ptr[-1], dtype=np.int8)
        for tid in plan.task_ids:
            ws, vs = rows[tid]
            workers[ptr[tid]:ptr[tid + 1]] = ws
            values[ptr[tid]:ptr[tid + 1]] = vs
        return cls(m, n, ptr, workers, values)

    @property
    def nnz(self) -> int:
        return int(self.values.size)

    def workers_of(self, i: int) -> np.ndarray:
        return self.workers[self.task_ptr[i]:self.task_ptr[i + 1]]

    def values_of(self, i: int) -> np.ndarray:
        return self.values[self.task_ptr[i]:self.task_ptr[i + 1]]

    def counts(self) -> np.ndarray:
        """|N_i| for every task."""
        return np.diff(self.task_ptr)

    def get(self, i: int, j: int) -> int:
        row = self.workers_of(i)
        k = np.searchsorted(row, j)
        if k < row.size and row[k] == j:
            return int(self.values_of(i)[k])
        return 0

    def entries(self) -> Iterator[tuple[int, int, int]]:
        for i in range(self.m):
            for j, v in zip(self.workers_of(i), self.values_of(i)):
                yield i, int(j), int(v)

    def entry_tasks(self) -> np.ndarray:
        """Task index of every stored entry, aligned with .workers/.values."""
        return np.repeat(np.arange(self.m, dtype=np.int64), self.counts())

    def dense_block(self, task_ids: Sequence[int]) -> np.ndarray:
        """Dense (-1/+1) block for tasks answered by all n workers."""
        task_ids = np.asarray(task_ids, dtype=np.int64)
        out = np.empty((task_ids.size, self.n), dtype=np.int8)
        for k, i in enumerate(task_ids):
            if self.task_ptr[i + 1] - self.task_ptr[i] != self.n:
                raise ShapeError(f"task {i} was not assigned to all workers")
            out[k, self.workers_of(i)] = self.values_of(i)
        return out

    def __eq__(self, other) -> bool:
        if not isinstance(other, AnswerMatrix):
            return NotImplemented
        return (
            self.m == other.m
            and self.n == other.n
            and np.array_equal(self.task_ptr, other.task_ptr)
            and np.array_equal(self.workers, other.workers)
            and np.array_equal(self.values, other.values)
        )


def sample_world(params: ModelParams, m: int, n: int, seed: int) -> World:
    """Draw labels uniform on {-1,+1} and types uniform on 1..d, i.i.d."""
    if m < 1 or n < 1:
        raise InvalidParameterError("m and n must be >= 1")
    rng = substream(seed, "world")
    labels = rng.integers(0, 2, size=m, dtype=np.int8) * 2 - 1
    task_types = rng.integers(1, params.d + 1, size=m, dtype=np.int32)
    worker_types = rng.integers(1, params.d + 1, size=n, dtype=np.int32)
    return World(labels, task_types, worker_types)


def assign_uniform(n: int, tasks: Sequence[int], k: int, seed: int) -> AssignmentPlan:
    """Assign each listed task to k distinct workers, uniformly at random."""
    if k < 0 or k > n:
        raise InvalidAssignmentError(f"cannot pick k={k} distinct workers from n={n}")
    tasks = np.asarray(tasks, dtype=np.int64)
    rng = substream(seed, "assign-uniform")
    if k == 0:
        return AssignmentPlan(tasks, [np.empty(0, dtype=np.int64)] * tasks.size)
    keys = rng.random((tasks.size, n))
    picks = np.argpartition(keys, k - 1, axis=1)[:, :k]
    picks.sort(axis=1)
    return AssignmentPlan(tasks, list(picks.astype(np.int64)))


def assign_per_cluster(clustering, tasks: Sequence[int], l: int, seed: int) -> AssignmentPlan:
    """Assign each task to l distinct workers from every cluster.

    Raises InsufficientClusterError when some cluster has fewer than l
    members, mirroring the theory's requirement that every type holds at
    least l workers.
    """
    from .errors import InsufficientClusterError

    tasks = np.asarray(tasks, dtype=np.int64)
    sizes = [members.size for members in clustering.clusters]
    if l > 0 and min(sizes) < l:
        z = int(np.argmin(sizes)) + 1
        raise InsufficientClusterError(
            f"cluster {z} has {min(sizes)} workers, need at least l={l}"
        )
    rng = substream(seed, "assign-cluster")
    per_task = [[] for _ in range(tasks.size)]
    if l > 0:
        for members in clustering.clusters:
            keys = rng.random((tasks.size, members.size))
            picks = np.argpartition(keys, l - 1, axis=1)[:, :l]
            for t in range(tasks.size):
                per_task[t].append(members[picks[t]])
    workers = [
        np.sort(np.concatenate(parts)) if parts else np.empty(0, dtype=np.int64)
        for parts in per_task
    ]
    return AssignmentPlan(tasks, workers)


def assign_budgeted(clustering, tasks: Sequence[int], total: int, seed: int) -> AssignmentPlan:
    """Assign ~total workers per task, spread as evenly as possible over clusters.

    With c == d equally sized clusters and total = l*d this reduces to
    l workers per cluster.  When clustering produced more (or undersized)
    clusters, quotas are capped at cluster sizes and the remainder is
    redistributed, so the realized per-task budget stays at
    min(total, n).  Keeps cross-algorithm budget comparisons honest when
    a clustering run fragments.
    """
    tasks = np.asarray(tasks, dtype=np.int64)
    sizes = np.array([members.size for members in clustering.clusters], dtype=np.int64)
    c = sizes.size
    quota = np.full(c, total // c, dtype=np.int64)
    quota[: total % c] += 1
    quota = np.minimum(quota, sizes)
    shortfall = total - int(quota.sum())
    while shortfall > 0:
        room = sizes - quota
        if room.sum() == 0:
            break
        z = int(np.argmax(room))
        add = min(shortfall, int(room[z]))
        quota[z] += add
        shortfall -= add
    rng = substream(seed, "assign-cluster")
    per_task = [[] for _ in range(tasks.size)]
    for members, take in zip(clustering.clusters, quota):
        if take == 0:
            continue
        keys = rng.random((tasks.size, members.size))
        picks = np.argpartition(keys, take - 1, axis=1)[:, :take]
        for t in range(tasks.size):
            per_task[t].append(members[picks[t]])
    workers = [
        np.sort(np.concatenate(parts)) if parts else np.empty(0, dtype=np.int64)
        for parts in per_task
    ]
    return AssignmentPlan(tasks, workers)


def sample_answers(world: World, params: ModelParams, plan: AssignmentPlan, seed: int) -> AnswerMatrix:
    """Sample answers: the true label with probability p (matched) or q."""
    if plan.task_ids.size and (plan.task_ids.min() < 0 or plan.task_ids.max() >= world.m):
        raise ShapeError("task id outside world")
    sizes = np.array([ws.size for ws in plan.workers], dtype=np.int64)
    if sizes.sum() == 0:
        return AnswerMatrix.from_plan(world.m, world.n, plan, [[] for _ in plan.workers])
    flat_tasks = np.repeat(plan.task_ids, sizes)
    flat_workers = np.concatenate([ws for ws in plan.workers if ws.size])
    if flat_workers.min() < 0 or flat_workers.max() >= world.n:
        raise ShapeError("worker index outside world")
    matched = world.task_types[flat_tasks] == world.worker_types[flat_workers]
    correct = substream(seed, "answers").random(flat_workers.size) < params.fidelity(matched)
    flat_values = np.where(correct, world.labels[flat_tasks], -world.labels[flat_tasks])
    offsets = np.concatenate(([0], np.cumsum(sizes)))
    values_per_task = [
        flat_values[offsets[k]:offsets[k + 1]] for k in range(plan.task_ids.size)
    ]
    return AnswerMatrix.from_plan(world.m, world.n, plan, values_per_task)


def agreement_probabilities(params: ModelParams) -> tuple[float, float]:
    """P(two workers give equal answers to a random task), same vs different type.

    Same type:      (p^2+(1-p)^2)/d + (d-1)(q^2+(1-q)^2)/d
    Different type: 2(pq+(1-p)(1-q))/d + (d-2)(q^2+(1-q)^2)/d
    """
    p, q, d = params.p, params.q, params.d
    qq = q * q + (1 - q) * (1 - q)
    same = (p * p + (1 - p) * (1 - p)) / d + (d - 1) * qq / d
    diff = 2 * (p * q + (1 - p) * (1 - q)) / d + (d - 2) * qq / d
    return same, diff


def pairwise_product_rates(params: ModelParams) -> tuple[float, float]:
    """E[answer product] per shared task for same-type and cross-type pairs.

    Same type:  p_m = ((2p-1)^2 + (d-1)(2q-1)^2)/d
    Cross type: p_u = (2(2p-1)(2q-1) + (d-2)(2q-1)^2)/d
    """
    p, q, d = params.p, params.q, params.d
    gp, gq = 2 * p - 1, 2 * q - 1
    p_m = (gp * gp + (d - 1) * gq * gq) / d
    p_u = (2 * gp * gq + (d - 2) * gq * gq) / d
    return p_m, p_u


def save_answer_matrix(path, answers: AnswerMatrix, params: ModelParams) -> None:
    """Write the line format: header ``m n d p q`` then one ``i j v`` per answer."""
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"{answers.m} {answers.n} {params.d} {params.p!r} {params.q!r}\n")
        for i, j, v in answers.entries():
            fh.write(f"{i} {j} {v}\n")


def load_answer_matrix(path) -> tuple[AnswerMatrix, ModelParams]:
    with open(path, "r", encoding="ascii") as fh:
        header = fh.readline().split()
        if len(header) != 5:
            raise ShapeError("expected header 'm n d p q'")
        m, n, d = int(header[0]), int(header[1]), int(header[2])
        params = ModelParams(d=d, p=float(header[3]), q=float(header[4]))
        tasks, workers, values = [], [], []
        for line in fh:
            if not line.strip():
                continue
            i, j, v = line.split()
            tasks.append(int(i))
            workers.append(int(j))
            values.append(int(v))
    order = np.lexsort((np.asarray(workers), np.asarray(tasks)))
    tasks = np.asarray(tasks, dtype=np.int64)[order] if tasks else np.empty(0, np.int64)
    workers = np.asarray(workers, dtype=np.int64)[order] if workers else np.empty(0, np.int64)
    values = np.asarray(values, dtype=np.int8)[order] if values else np.empty(0, np.int8)
    ptr = np.zeros(m + 1, dtype=np.int64)
    np.cumsum(np.bincount(tasks, minlength=m), out=ptr[1:])
    return AnswerMatrix(m, n, ptr, workers, values), params


def save_world(path, world: World) -> None:
    """Line format: header ``m n d``, one ``label type`` line per task, one type per worker."""
    d = int(max(world.task_types.max(), world.worker_types.max()))
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"{world.m} {world.n} {d}\n")
        for a, t in zip(world.labels, world.task_types):
            fh.write(f"{int(a)} {int(t)}\n")
        for w in world.worker_types:
            fh.write(f"{int(w)}\n")


def load_world(path) -> World:
    with open(path, "r", encoding="ascii") as fh:
        m, n, _ = (int(x) for x in fh.readline().split())
        labels = np.empty(m, dtype=np.int8)
        task_types = np.empty(m, dtype=np.int32)
        for i in range(m):
            a, t = fh.readline().split()
            labels[i], task_types[i] = int(a), int(t)
        worker_types = np.array([int(fh.readline()) for _ in range(n)], dtype=np.int32)
    return World(labels, task_types, worker_types)
