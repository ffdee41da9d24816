import math

import numpy as np
import pytest

from crowdtypes import (
    AnswerMatrix,
    BudgetKnobs,
    Clustering,
    EstimationFailureError,
    InvalidParameterError,
    ModelParams,
    NoVotesError,
    ReliabilityEstimates,
    World,
    estimate_pq,
    infer_alg1,
    infer_alg2,
    infer_prior_alg,
    run_pipeline,
    sample_world,
    split_workers,
    type_match,
)
from crowdtypes.inference import tie_coins
from crowdtypes.rng import derive_seed


def answers_from_rows(m, n, rows):
    """rows: {task: {worker: value}}"""
    ptr = np.zeros(m + 1, dtype=np.int64)
    workers, values = [], []
    for i in range(m):
        row = sorted(rows.get(i, {}).items())
        ptr[i + 1] = ptr[i] + len(row)
        workers.extend(j for j, _ in row)
        values.extend(v for _, v in row)
    return AnswerMatrix(m, n, ptr, workers, values)


class TestTypeMatch:
    def test_unanimous_cluster_wins(self):
        # cluster 1: (+1,+1,+1) tally 3; cluster 2: (+1,-1) tally 0
        clustering = Clustering.from_assignments([1, 1, 1, 2, 2])
        answers = answers_from_rows(1, 5, {0: {0: 1, 1: 1, 2: 1, 3: 1, 4: -1}})
        assert type_match(answers, clustering, 0) == 1

    def test_absolute_value_matters(self):
        clustering = Clustering.from_assignments([1, 1, 2, 2, 2])
        answers = answers_from_rows(1, 5, {0: {0: 1, 1: 1, 2: -1, 3: -1, 4: -1}})
        assert type_match(answers, clustering, 0) == 2

    def test_all_zero_tallies_lowest_id(self):
        clustering = Clustering.from_assignments([1, 1, 2, 2])
        answers = answers_from_rows(1, 4, {0: {0: 1, 1: -1, 2: 1, 3: -1}})
        assert type_match(answers, clustering, 0) == 1

    def test_no_answers(self):
        clustering = Clustering.from_assignments([1, 1])
        answers = answers_from_rows(2, 2, {0: {0: 1, 1: 1}})
        with pytest.raises(NoVotesError):
            type_match(answers, clustering, 1)


class TestInferPriorAlg:
    def test_matched_cluster_unanimous(self):
        clustering = Clustering.from_assignments([1, 1, 1, 2, 2])
        answers = answers_from_rows(1, 5, {0: {0: 1, 1: 1, 2: 1, 3: -1, 4: 1}})
        assert infer_prior_alg(answers, clustering, 0, seed=0) == 1

    def test_ignores_other_clusters(self):
        clustering = Clustering.from_assignments([1, 1, 1, 2, 2])
        base = {0: 1, 1: 1, 2: 1}
        for flip in ({3: 1, 4: 1}, {3: -1, 4: 1}, {3: 1, 4: -1}):
            answers = answers_from_rows(1, 5, {0: {**base, **flip}})
            assert infer_prior_alg(answers, clustering, 0, seed=9) == 1


class TestInferAlg1:
    def test_weighted_margin_sign(self):
        # matched cluster votes -1 -1, other cluster +1 +1 +1:
        # argmax|T| picks the 3-vote cluster, margin 0.8*3 + 0.4*(-2) > 0
        params = ModelParams(d=2, p=0.9, q=0.7)
        clustering = Clustering.from_assignments([1, 1, 2, 2, 2])
        answers = answers_from_rows(1, 5, {0: {0: -1, 1: -1, 2: 1, 3: 1, 4: 1}})
        assert infer_alg1(answers, clustering, 0, params, seed=0) == 1

    def test_collapse_at_half_per_task(self, rng):
        # q = 1/2 nulls unmatched weights: identical to the matched-cluster vote
        params = ModelParams(d=3, p=0.9, q=0.5)
        clustering = Clustering.from_assignments(rng.integers(1, 4, size=12).tolist())
        n = 12
        for trial in range(100):
            row = {j: int(rng.choice([-1, 1])) for j in range(n)}
            answers = answers_from_rows(1, n, {0: row})
            seed = int(rng.integers(1 << 20))
            assert infer_alg1(answers, clustering, 0, params, seed) == infer_prior_alg(
                answers, clustering, 0, seed
            )

    def test_oracle_coincidence_when_match_correct(self):
        # correct type match plus perfect clustering equals oracle weighting
        params = ModelParams(d=2, p=0.9, q=0.6)
        world = World(
            labels=np.array([1]),
            task_types=np.array([1]),
            worker_types=np.array([1, 1, 1, 2, 2]),
        )
        clustering = Clustering.from_worker_types(world.worker_types)
        answers = answers_from_rows(1, 5, {0: {0: 1, 1: 1, 2: -1, 3: -1, 4: 1}})
        got = infer_alg1(answers, clustering, 0, params, seed=3)
        matched = world.task_types[0] == world.worker_types
        weights = np.where(matched, 0.8, 0.2)
        votes = np.array([1, 1, -1, -1, 1])
        assert got == int(np.sign((weights * votes).sum()))


class TestSplitWorkers:
    def test_beta_range(self):
        clustering = Clustering.from_assignments([1, 1, 2])
        with pytest.raises(InvalidParameterError):
            split_workers(clustering, 0.0, 1)
        with pytest.raises(InvalidParameterError):
            split_workers(clustering, 1.2, 1)

    def test_beta_one_empties_voting_pool(self):
        clustering = Clustering.from_assignments([1, 1, 2])
        split = split_workers(clustering, 1.0, 1)
        assert split.voting_pool.size == 0
        answers = answers_from_rows(1, 3, {0: {0: 1, 1: 1, 2: -1}})
        est = ReliabilityEstimates(0.9, 0.6, 0.9, 0.6, np.zeros(1), np.zeros(1), 0, False)
        with pytest.raises(NoVotesError):
            infer_alg2(answers, clustering, split, est, 0, seed=0)

    def test_binomial_concentration(self):
        clustering = Clustering.from_assignments(np.ones(10_000, dtype=int).tolist())
        split = split_workers(clustering, 0.2, 7)
        frac = split.in_estimation.mean()
        assert 0.188 <= frac <= 0.212

    def test_cluster_pools_partition(self):
        clustering = Clustering.from_assignments([1, 2, 1, 2, 1])
        split = split_workers(clustering, 0.5, 3)
        for (est, vote), members in zip(split.cluster_pools(clustering), clustering.clusters):
            assert np.array_equal(np.sort(np.concatenate([est, vote])), members)


class TestEstimatePq:
    def _setup(self, est_flags, rows, assignments=(1, 1, 1, 2, 2, 2)):
        clustering = Clustering.from_assignments(list(assignments))
        split_mask = np.array(est_flags, dtype=bool)
        split = split_workers(clustering, 0.5, 0)
        object.__setattr__(split, "in_estimation", split_mask)
        answers = answers_from_rows(len(rows), len(assignments), rows)
        return answers, clustering, split

    def test_unanimous_matched_pool(self):
        # estimation pool: workers 0,1,2 (matched cluster) and 3,4 (other)
        answers, clustering, split = self._setup(
            [True, True, True, True, True, False],
            {0: {0: 1, 1: 1, 2: 1, 3: 1, 4: -1, 5: 1}},
        )
        est = estimate_pq(answers, clustering, split)
        assert est.per_task_p[0] == 1.0
        assert est.per_task_q[0] == 0.5

    def test_split_vote_gives_half(self):
        answers, clustering, split = self._setup(
            [True, True, False, True, False, False],
            {0: {0: 1, 1: -1, 2: 1, 3: 1, 4: -1, 5: 1}},
        )
        est = estimate_pq(answers, clustering, split)
        assert est.per_task_p[0] == 0.5

    def test_skips_tasks_missing_pools(self):
        answers, clustering, split = self._setup(
            [True, True, True, True, False, False],
            {
                0: {0: 1, 1: 1, 2: 1, 5: 1},   # worker 3 absent: no unmatched pool
                1: {0: 1, 1: 1, 2: 1, 3: -1, 4: 1, 5: 1},
            },
        )
        est = estimate_pq(answers, clustering, split)
        assert est.skipped_tasks == 1
        assert math.isnan(est.per_task_p[0])
        assert est.per_task_p[1] == 1.0

    def test_all_skipped_raises(self):
        answers, clustering, split = self._setup(
            [False] * 6, {0: {0: 1, 1: 1, 2: 1, 3: -1, 4: 1, 5: 1}}
        )
        with pytest.raises(EstimationFailureError):
            estimate_pq(answers, clustering, split)

    def test_ordering_guard_swaps(self):
        # tallies tie at 2 so cluster 1 is matched; its estimation pool is
        # split 50/50 while the unmatched pool is unanimous: raw p < raw q
        row = {0: 1, 1: -1, 2: 1, 3: 1, 4: 1, 5: 1}
        answers, clustering, split = self._setup(
            [True, True, False, False, True, False],
            {0: dict(row), 1: dict(row)},
            assignments=(1, 1, 1, 1, 2, 2),
        )
        est = estimate_pq(answers, clustering, split)
        assert est.swapped
        assert est.p_hat >= est.q_hat
        assert est.p_hat == 1.0 and est.q_hat == 0.5

    def test_consistency_as_pools_grow(self):
        # the max-fraction estimator is biased upward for small pools;
        # the bias must shrink with l and become negligible by l = 160
        from crowdtypes.model import AssignmentPlan, sample_answers
        from crowdtypes.rng import substream

        params = ModelParams(d=3, p=0.9, q=0.6)
        m = 1500
        q_dev = []
        p_dev = []
        for l in (10, 40, 160):
            n = l * params.d
            worker_types = np.repeat([1, 2, 3], l).astype(np.int32)
            rng = substream(64, "balanced", l)
            world = World(
                labels=(rng.integers(0, 2, m, dtype=np.int8) * 2 - 1),
                task_types=rng.integers(1, 4, m).astype(np.int32),
                worker_types=worker_types,
            )
            clustering = Clustering.from_worker_types(worker_types)
            plan = AssignmentPlan(np.arange(m), [np.arange(n)] * m)
            answers = sample_answers(world, params, plan, 65)
            split = split_workers(clustering, 0.3, 66)
            est = estimate_pq(answers, clustering, split)
            p_dev.append(abs(est.p_hat - params.p))
            q_dev.append(abs(est.q_hat - params.q))
        assert q_dev[0] > q_dev[1] > q_dev[2]
        assert p_dev[2] <= 0.01
        assert q_dev[2] <= 0.01


class TestInferAlg2:
    def test_plugin_identity_with_true_parameters(self):
        params = ModelParams(d=2, p=0.9, q=0.7)
        clustering = Clustering.from_assignments([1, 1, 1, 2, 2])
        split = split_workers(clustering, 0.5, 0)
        object.__setattr__(split, "in_estimation", np.zeros(5, dtype=bool))
        est = ReliabilityEstimates(params.p, params.q, params.p, params.q,
                                   np.zeros(1), np.zeros(1), 0, False)
        answers = answers_from_rows(1, 5, {0: {0: 1, 1: -1, 2: 1, 3: -1, 4: -1}})
        got = infer_alg2(answers, clustering, split, est, 0, seed=4)
        assert got == infer_alg1(answers, clustering, 0, params, seed=4)

    def test_equal_estimates_reduce_to_majority(self):
        clustering = Clustering.from_assignments([1, 1, 2, 2, 2])
        split = split_workers(clustering, 0.5, 0)
        object.__setattr__(split, "in_estimation", np.zeros(5, dtype=bool))
        est = ReliabilityEstimates(0.75, 0.75, 0.75, 0.75, np.zeros(1), np.zeros(1), 0, False)
        answers = answers_from_rows(1, 5, {0: {0: -1, 1: -1, 2: 1, 3: 1, 4: 1}})
        got = infer_alg2(answers, clustering, split, est, 0, seed=8)
        assert got == 1  # plain majority of (-1,-1,+1,+1,+1)


class TestRunPipeline:
    def test_noiseless_zero_error(self):
        # single type with p = 1 makes every answer correct
        params = ModelParams(d=1, p=1.0, q=0.5)
        world = sample_world(params, 300, 20, 1)
        knobs = BudgetKnobs(r=30, l=3)
        for algorithm in ("mv", "oracle_wmv", "prior", "alg1", "alg2"):
            res = run_pipeline(world, params, algorithm, knobs, seed=2)
            assert res.error_fraction == 0.0
            assert res.failure is None

    def test_deterministic(self, params):
        world = sample_world(params, 400, 30, 5)
        knobs = BudgetKnobs(r=100, l=4)
        a = run_pipeline(world, params, "alg1", knobs, 9, keep_predictions=True)
        b = run_pipeline(world, params, "alg1", knobs, 9, keep_predictions=True)
        assert a.error_fraction == b.error_fraction
        assert np.array_equal(a.predictions, b.predictions)

    def test_query_accounting_identity(self, params):
        world = sample_world(params, 500, 24, 6)
        knobs = BudgetKnobs(r=120, l=4)
        res = run_pipeline(world, params, "prior", knobs, 11)
        # amortized = (n*r + total stage-2 queries) / m
        expected = (24 * 120 + res.queries_eval_mean * res.n_eval_tasks) / 500
        assert math.isclose(res.queries_per_task, expected, rel_tol=1e-12)

    def test_uniform_budget_for_baselines(self, params):
        world = sample_world(params, 200, 30, 7)
        res = run_pipeline(world, params, "mv", BudgetKnobs(r=50, l=5), 3)
        assert res.queries_per_task == 15.0

    def test_probe_depth_validation(self, params):
        world = sample_world(params, 100, 10, 8)
        with pytest.raises(InvalidParameterError):
            run_pipeline(world, params, "alg1", BudgetKnobs(r=100, l=2), 1)

    def test_unknown_algorithm(self, params):
        world = sample_world(params, 100, 10, 8)
        with pytest.raises(InvalidParameterError):
            run_pipeline(world, params, "em", BudgetKnobs(r=10, l=2), 1)

    def test_oracle_dominates_majority_vote(self):
        # averaged over trials at a fixed budget, oracle weighting cannot
        # lose to uniform weighting beyond Monte Carlo noise
        params = ModelParams(d=3, p=0.9, q=0.6)
        knobs = BudgetKnobs(r=10, l=4)
        diffs = []
        for t in range(20):
            seed = derive_seed(2024, "dominance", t)
            world = sample_world(params, 800, 30, derive_seed(seed, "world"))
            mv = run_pipeline(world, params, "mv", knobs, seed)
            oracle = run_pipeline(world, params, "oracle_wmv", knobs, seed)
            diffs.append(oracle.error_fraction - mv.error_fraction)
        diffs = np.asarray(diffs)
        se = diffs.std(ddof=1) / math.sqrt(diffs.size)
        assert diffs.mean() <= 3 * se

    def test_shared_tie_coins(self):
        coins_a = tie_coins(5, 100)
        coins_b = tie_coins(5, 100)
        assert np.array_equal(coins_a, coins_b)
        assert set(np.unique(coins_a)) <= {-1, 1}
        # per-task coin is a prefix property: extending m keeps earlier coins
        assert np.array_equal(tie_coins(5, 50), coins_a[:50])
