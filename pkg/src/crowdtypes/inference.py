"""Label inference pipelines on top of a worker clustering.

Implemented decision rules, all sharing the same per-task tie coin:

* ``mv``          plain majority vote over uniformly assigned workers
* ``oracle_wmv``  weighted vote with the true types and (p, q) known
* ``prior``       majority vote restricted to the tally-matched cluster
* ``alg1``        weighted vote over all clusters, weight 2p-1 on the
                  matched cluster and 2q-1 elsewhere (needs p, q)
* ``alg2``        like alg1 but with (p, q) replaced by estimates from a
                  held-out estimation pool (needs nothing but d)
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .budgets import stage1_recommendation
from .clustering import Clustering, cluster_sequential, partition_equal, probe_block_from_answers
from .errors import (
    EstimationFailureError,
    InvalidParameterError,
    NoVotesError,
    ShapeError,
)
from .model import (
    AnswerMatrix,
    AssignmentPlan,
    ModelParams,
    World,
    assign_budgeted,
    assign_uniform,
    sample_answers,
)
from .rng import derive_seed, substream
from .sdp import SdpSolverConfig, cluster_workers_sdp

ALGORITHMS = ("mv", "oracle_wmv", "prior", "alg1", "alg2")


def tie_coins(seed: int, m: int) -> np.ndarray:
    """Per-task fair coins in {-1,+1}; coin i depends only on (seed, i).

    Shared by every decision rule so that algorithms which agree on all
    margins also agree on tie-broken labels.
    """
    return substream(seed, "tiebreak").integers(0, 2, size=m).astype(np.int8) * 2 - 1


def cluster_tallies(answers: AnswerMatrix, clustering: Clustering):
    """Signed sums and positive-vote counts per (task, cluster)."""
    c = clustering.c
    tasks = answers.entry_tasks()
    cl = clustering.assignments[answers.workers] - 1
    idx = tasks * c + cl
    size = answers.m * c
    signed = np.bincount(idx, weights=answers.values, minlength=size).reshape(answers.m, c)
    counts = np.bincount(idx, minlength=size).reshape(answers.m, c)
    positive = np.bincount(idx, weights=(answers.values == 1), minlength=size).reshape(answers.m, c)
    return signed, counts, positive


def type_match(answers: AnswerMatrix, clustering: Clustering, i: int) -> int:
    """Cluster with the largest absolute tally on task i (lowest id wins ties)."""
    workers = answers.workers_of(i)
    if workers.size == 0:
        raise NoVotesError(f"task {i} has no answers")
    values = answers.values_of(i).astype(np.int64)
    cl = clustering.assignments[workers] - 1
    tallies = np.bincount(cl, weights=values, minlength=clustering.c)
    return int(np.argmax(np.abs(tallies))) + 1


def infer_prior_alg(answers: AnswerMatrix, clustering: Clustering, i: int, seed: int) -> int:
    """Majority vote using only the answers from the matched cluster."""
    z = type_match(answers, clustering, i)
    workers = answers.workers_of(i)
    values = answers.values_of(i).astype(np.int64)
    mask = clustering.assignments[workers] == z
    margin = values[mask].sum()
    if margin == 0:
        return int(tie_coins(seed, i + 1)[i])
    return 1 if margin > 0 else -1


def infer_alg1(answers: AnswerMatrix, clustering: Clustering, i: int, params: ModelParams, seed: int) -> int:
    """Weighted vote: 2p-1 on the matched cluster, 2q-1 on the rest."""
    z = type_match(answers, clustering, i)
    workers = answers.workers_of(i)
    values = answers.values_of(i).astype(np.int64)
    matched = clustering.assignments[workers] == z
    t_matched = int(values[matched].sum())
    t_other = int(values.sum()) - t_matched
    margin = (2 * params.p - 1) * t_matched + (2 * params.q - 1) * t_other
    if margin == 0.0:
        return int(tie_coins(seed, i + 1)[i])
    return 1 if margin > 0 else -1


@dataclass(frozen=True)
class WorkerSplit:
    """Random split of each cluster into an estimation and a voting pool."""

    in_estimation: np.ndarray
    beta: float

    @property
    def estimation_pool(self) -> np.ndarray:
        return np.flatnonzero(self.in_estimation)

    @property
    def voting_pool(self) -> np.ndarray:
        return np.flatnonzero(~self.in_estimation)

    def cluster_pools(self, clustering: Clustering) -> list[tuple[np.ndarray, np.ndarray]]:
        return [
            (members[self.in_estimation[members]], members[~self.in_estimation[members]])
            for members in clustering.clusters
        ]


def split_workers(clustering: Clustering, beta: float, seed: int) -> WorkerSplit:
    """Independent per-worker coin: estimation pool with probability beta."""
    if not (0.0 < beta <= 1.0):
        raise InvalidParameterError(f"beta must lie in (0,1], got {beta}")
    draws = substream(seed, "split").random(clustering.n)
    return WorkerSplit(in_estimation=draws < beta, beta=beta)


@dataclass(frozen=True)
class ReliabilityEstimates:
    """Averaged plug-in estimates of (p, q) with per-task diagnostics."""

    p_hat: float
    q_hat: float
    p_raw: float
    q_raw: float
    per_task_p: np.ndarray = field(repr=False)
    per_task_q: np.ndarray = field(repr=False)
    skipped_tasks: int
    swapped: bool


def estimate_pq(
    answers: AnswerMatrix,
    clustering: Clustering,
    split: WorkerSplit,
    tasks=None,
) -> ReliabilityEstimates:
    """Majority-fraction estimates of p and q from the estimation pool.

    For each task the matched-cluster entries of the estimation pool give
    p_i as the larger of the +1/-1 fractions, the remaining estimation
    entries give q_i likewise.  Tasks where either set is empty are
    skipped; the averages are clamped to [1/2, 1] and ordered p >= q.
    """
    m = answers.m
    tasks = np.arange(m) if tasks is None else np.asarray(tasks, dtype=np.int64)
    signed, counts, positive = cluster_tallies(answers, clustering)
    z_star = np.argmax(np.abs(signed), axis=1)

    entry_tasks = answers.entry_tasks()
    est = split.in_estimation[answers.workers]
    matched = (clustering.assignments[answers.workers] - 1) == z_star[entry_tasks]
    pos = answers.values == 1

    def frac_stats(mask):
        cnt = np.bincount(entry_tasks[mask], minlength=m).astype(np.float64)
        hit = np.bincount(entry_tasks[mask & pos], minlength=m).astype(np.float64)
        return cnt, hit

    m_cnt, m_pos = frac_stats(est & matched)
    u_cnt, u_pos = frac_stats(est & ~matched)

    on = np.zeros(m, dtype=bool)
    on[tasks] = True
    valid = on & (m_cnt > 0) & (u_cnt > 0)
    per_task_p = np.full(m, np.nan)
    per_task_q = np.full(m, np.nan)
    with np.errstate(invalid="ignore", divide="ignore"):
        fp = m_pos / m_cnt
        fq = u_pos / u_cnt
    per_task_p[valid] = np.maximum(fp[valid], 1 - fp[valid])
    per_task_q[valid] = np.maximum(fq[valid], 1 - fq[valid])
    n_valid = int(valid.sum())
    if n_valid == 0:
        raise EstimationFailureError("every task lacked estimation-pool answers")
    p_raw = float(per_task_p[valid].mean())
    q_raw = float(per_task_q[valid].mean())
    p_hat = min(max(p_raw, 0.5), 1.0)
    q_hat = min(max(q_raw, 0.5), 1.0)
    swapped = p_hat < q_hat
    if swapped:
        p_hat, q_hat = q_hat, p_hat
    return ReliabilityEstimates(
        p_hat=p_hat,
        q_hat=q_hat,
        p_raw=p_raw,
        q_raw=q_raw,
        per_task_p=per_task_p,
        per_task_q=per_task_q,
        skipped_tasks=int(on.sum()) - n_valid,
        swapped=swapped,
    )


def infer_alg2(
    answers: AnswerMatrix,
    clustering: Clustering,
    split: WorkerSplit,
    estimates: ReliabilityEstimates,
    i: int,
    seed: int,
) -> int:
    """Weighted vote over the voting pool with plug-in weights."""
    z = type_match(answers, clustering, i)
    workers = answers.workers_of(i)
    voting = ~split.in_estimation[workers]
    if not voting.any():
        raise NoVotesError(f"task {i} has no voting-pool answers")
    values = answers.values_of(i).astype(np.int64)[voting]
    matched = (clustering.assignments[workers] == z)[voting]
    t_matched = int(values[matched].sum())
    t_other = int(values.sum()) - t_matched
    margin = (2 * estimates.p_hat - 1) * t_matched + (2 * estimates.q_hat - 1) * t_other
    if margin == 0.0:
        return int(tie_coins(seed, i + 1)[i])
    return 1 if margin > 0 else -1


@dataclass(frozen=True)
class BudgetKnobs:
    """Query-budget knobs for one pipeline run.

    l is the per-cluster query count of the clustered algorithms; the
    uniform baselines draw k = l*d workers per task unless k is given.
    r is the probe depth (tasks answered by all workers).  When the
    clustering fragments into c != d clusters, per-task assignment keeps
    the total budget at l*d by spreading quotas over the c clusters.
    """

    r: int
    l: int
    k: int | None = None
    beta: float = 0.3
    zeta: float | None = None
    solver: SdpSolverConfig = field(default_factory=SdpSolverConfig)

    def queries_per_task(self, d: int) -> int:
        return self.k if self.k is not None else self.l * d


@dataclass
class ExperimentResult:
    """Outcome of one pipeline run on one sampled world."""

    algorithm: str
    seed: int
    error_fraction: float
    error_fraction_all: float
    queries_per_task: float
    queries_eval_mean: float
    n_eval_tasks: int
    clustering_ok: bool | None = None
    n_clusters: int | None = None
    p_hat: float | None = None
    q_hat: float | None = None
    estimates: "ReliabilityEstimates | None" = field(default=None, repr=False)
    hoeffding_bound_mean: float | None = None
    wall_time: float = 0.0
    failure: str | None = None
    predictions: np.ndarray | None = field(default=None, repr=False)
    eval_tasks: np.ndarray | None = field(default=None, repr=False)


def pool_tallies(answers: AnswerMatrix, clustering: Clustering, pool_mask) -> np.ndarray:
    """Signed per-(task, cluster) sums restricted to a worker pool."""
    c = clustering.c
    keep = pool_mask[answers.workers]
    tasks = answers.entry_tasks()[keep]
    cl = clustering.assignments[answers.workers[keep]] - 1
    return np.bincount(
        tasks * c + cl, weights=answers.values[keep], minlength=answers.m * c
    ).reshape(answers.m, c)


def _margins_from_tallies(signed, z_star, weight_matched, weight_other):
    """weight_m * T_matched + weight_u * (T_total - T_matched).

    The tallies are exact integers in float64, so a zero weight
    contributes an exact zero: algorithms whose weights differ only on
    zero-weight clusters produce bit-identical margins.
    """
    t_matched = signed[np.arange(signed.shape[0]), z_star]
    return weight_matched * t_matched + weight_other * (signed.sum(axis=1) - t_matched)


def _labels_from_margins(margins, coins):
    labels = np.sign(margins).astype(np.int8)
    ties = labels == 0
    labels[ties] = coins[ties]
    return labels


def run_pipeline(
    world: World,
    params: ModelParams,
    algorithm: str,
    knobs: BudgetKnobs,
    seed: int,
    keep_predictions: bool = False,
) -> ExperimentResult:
    """Run one algorithm end to end on a sampled world.

    The uniform baselines assign k workers to every task.  The clustered
    algorithms first collect the dense probe block (r tasks, all
    workers), cluster, then assign the per-task budget over clusters for
    the remaining tasks; their error fraction is reported over those
    non-probe tasks (probe tasks are labeled too, from their full answer
    rows, and enter error_fraction_all).
    """
    if algorithm not in ALGORITHMS:
        raise InvalidParameterError(f"unknown algorithm {algorithm!r}")
    start = time.perf_counter()
    m, n, d = world.m, world.n, params.d
    coins = tie_coins(seed, m)
    k_total = min(knobs.queries_per_task(d), n)

    if algorithm in ("mv", "oracle_wmv"):
        plan = assign_uniform(n, np.arange(m), k_total, derive_seed(seed, "assign-eval"))
        answers = sample_answers(world, params, plan, derive_seed(seed, "answers-eval"))
        tasks = answers.entry_tasks()
        if algorithm == "mv":
            margins = np.bincount(tasks, weights=answers.values, minlength=m)
            bound_mean = None
        else:
            matched = world.task_types[tasks] == world.worker_types[answers.workers]
            gains = np.where(matched, 2 * params.p - 1, 2 * params.q - 1)
            margins = np.bincount(tasks, weights=gains * answers.values, minlength=m)
            # with weights 2f-1 the bound collapses to exp(-sum (2f-1)^2 / 2)
            s2 = np.bincount(tasks, weights=gains * gains, minlength=m)
            bound_mean = float(np.exp(-0.5 * s2).mean())
        labels = _labels_from_margins(margins, coins)
        err = float((labels != world.labels).mean())
        return ExperimentResult(
            algorithm=algorithm,
            seed=seed,
            error_fraction=err,
            error_fraction_all=err,
            queries_per_task=float(k_total),
            queries_eval_mean=float(k_total),
            n_eval_tasks=m,
            hoeffding_bound_mean=bound_mean,
            wall_time=time.perf_counter() - start,
            predictions=labels if keep_predictions else None,
            eval_tasks=np.arange(m) if keep_predictions else None,
        )

    if knobs.r >= m:
        raise InvalidParameterError(f"probe depth r={knobs.r} must be below m={m}")
    probe_tasks = np.sort(
        substream(seed, "probe-tasks").choice(m, size=knobs.r, replace=False)
    )
    eval_tasks = np.setdiff1d(np.arange(m), probe_tasks, assume_unique=True)
    plan_probe = AssignmentPlan(probe_tasks, [np.arange(n)] * probe_tasks.size)
    ans_probe = sample_answers(world, params, plan_probe, derive_seed(seed, "answers-probe"))
    block = probe_block_from_answers(ans_probe, probe_tasks)

    if algorithm in ("prior", "alg1"):
        zeta = knobs.zeta
        if zeta is None:
            zeta = stage1_recommendation(params, 0.1, n).zeta
        clustering = cluster_sequential(block, zeta)
    else:
        clustering, _ = cluster_workers_sdp(block, d, seed, knobs.solver)

    truth = Clustering.from_worker_types(world.worker_types)
    clustering_ok = partition_equal(clustering, truth)

    plan_eval = assign_budgeted(
        clustering, eval_tasks, k_total, derive_seed(seed, "assign-eval")
    )
    ans_eval = sample_answers(world, params, plan_eval, derive_seed(seed, "answers-eval"))
    answers = merge_answer_matrices(ans_probe, ans_eval)

    signed, _, _ = cluster_tallies(answers, clustering)
    z_star = np.argmax(np.abs(signed), axis=1)

    p_hat = q_hat = None
    estimates = None
    if algorithm == "prior":
        margins = signed[np.arange(m), z_star]
    elif algorithm == "alg1":
        margins = _margins_from_tallies(signed, z_star, 2 * params.p - 1, 2 * params.q - 1)
    elif clustering.c == 1:
        # a single cluster offers no unmatched answers to estimate q from
        # and no weights to decorrelate: plain majority vote over everything
        margins = signed[:, 0]
    else:
        split = split_workers(clustering, knobs.beta, seed)
        estimates = estimate_pq(answers, clustering, split, tasks=eval_tasks)
        p_hat, q_hat = estimates.p_hat, estimates.q_hat
        voting = pool_tallies(answers, clustering, ~split.in_estimation)
        margins = _margins_from_tallies(
            voting, z_star, 2 * estimates.p_hat - 1, 2 * estimates.q_hat - 1
        )
    labels = _labels_from_margins(margins, coins)
    err_all = float((labels != world.labels).mean())
    err_eval = float((labels[eval_tasks] != world.labels[eval_tasks]).mean())
    eval_counts = answers.counts()[eval_tasks]
    amortized = (n * probe_tasks.size + eval_counts.sum()) / m
    return ExperimentResult(
        algorithm=algorithm,
        seed=seed,
        error_fraction=err_eval,
        error_fraction_all=err_all,
        queries_per_task=float(amortized),
        queries_eval_mean=float(eval_counts.mean()),
        n_eval_tasks=eval_tasks.size,
        clustering_ok=clustering_ok,
        n_clusters=clustering.c,
        p_hat=p_hat,
        q_hat=q_hat,
        estimates=estimates,
        wall_time=time.perf_counter() - start,
        predictions=labels if keep_predictions else None,
        eval_tasks=eval_tasks if keep_predictions else None,
    )


def merge_answer_matrices(first: AnswerMatrix, second: AnswerMatrix) -> AnswerMatrix:
    """Combine two answer matrices with disjoint assigned (task, worker) pairs."""
    if (first.m, first.n) != (second.m, second.n):
        raise ShapeError("answer matrices must share dimensions")
    tasks = np.concatenate([first.entry_tasks(), second.entry_tasks()])
    workers = np.concatenate([first.workers, second.workers])
    values = np.concatenate([first.values, second.values])
    order = np.lexsort((workers, tasks))
    tasks, workers, values = tasks[order], workers[order], values[order]
    dup = (np.diff(tasks) == 0) & (np.diff(workers) == 0)
    if dup.any():
        raise ShapeError("answer matrices overlap")
    ptr = np.zeros(first.m + 1, dtype=np.int64)
    np.cumsum(np.bincount(tasks, minlength=first.m), out=ptr[1:])
    return AnswerMatrix(first.m, first.n, ptr, workers, values)
