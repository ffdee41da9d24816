import math

import pytest

from crowdtypes import (
    InvalidParameterError,
    ModelParams,
    budget_report,
    gamma_unmatched,
    stage1_recommendation,
    theoretical_error_bounds,
)

GRID_P = (0.7, 0.8, 0.9, 1.0)
GRID_Q = (0.5, 0.55, 0.6, 0.7)
GRID_D = (2, 3, 5, 10)
GRID_ALPHA = (0.01, 0.1)


def grid_points():
    for d in GRID_D:
        for p in GRID_P:
            for q in GRID_Q:
                if q < p:
                    for alpha in GRID_ALPHA:
                        yield ModelParams(d=d, p=p, q=q), alpha


class TestBudgetReport:
    def test_spot_values(self):
        rep = budget_report(ModelParams(d=3, p=0.9, q=0.6), 0.1)
        assert math.isclose(rep.gamma_u, 0.09, rel_tol=1e-6)
        assert math.isclose(rep.L_oracle, 6 / 0.72 * math.log(10), rel_tol=1e-9)
        assert math.isclose(rep.L_mv, 12.5 * math.log(10), rel_tol=1e-9)
        assert math.isclose(rep.gamma_m, 0.36, rel_tol=1e-9)
        assert math.isclose(rep.gamma_oracle, math.sqrt(0.72 / 3), rel_tol=1e-9)
        assert math.isclose(rep.gamma_mv, 1.2 / 3, rel_tol=1e-9)

    def test_oracle_never_exceeds_majority(self):
        for params, alpha in grid_points():
            rep = budget_report(params, alpha)
            assert rep.L_oracle <= rep.L_mv * (1 + 1e-12)

    def test_weighted_cluster_beats_matched_only_above_half(self):
        # strict improvement requires q > 1/2; at q = 1/2 the two
        # algorithms coincide and the union-bound constants differ
        for params, alpha in grid_points():
            rep = budget_report(params, alpha)
            if params.q > 0.5:
                assert rep.L_alg1 <= rep.L_type * (1 + 1e-12)

    def test_alpha_range(self):
        with pytest.raises(InvalidParameterError):
            budget_report(ModelParams(d=2, p=0.9, q=0.6), 0.0)
        with pytest.raises(InvalidParameterError):
            budget_report(ModelParams(d=2, p=0.9, q=0.6), 1.0)

    def test_all_budgets_positive_finite(self):
        for params, alpha in grid_points():
            rep = budget_report(params, alpha)
            for value in (rep.L_oracle, rep.L_mv, rep.L_type, rep.L_alg1):
                assert 0 < value < math.inf


class TestGammaUnmatched:
    def test_zero_exactly_at_half(self):
        for d in (2, 3, 5, 10):
            assert gamma_unmatched(ModelParams(d=d, p=0.9, q=0.5)) == 0.0

    def test_positive_above_half(self):
        for q in (0.55, 0.6, 0.7):
            assert gamma_unmatched(ModelParams(d=4, p=0.9, q=q)) > 0

    def test_hand_value(self):
        # (2*0.8*0.2 + 0.04)^2 / (2*(0.64 + 2*0.04)) = 0.1296/1.44
        got = gamma_unmatched(ModelParams(d=3, p=0.9, q=0.6))
        assert math.isclose(got, 0.1296 / 1.44, rel_tol=1e-9)

    def test_scaling_with_dimension(self):
        # q = 1/2: budget grows like d ln(d); q > 1/2: like ln(d)
        ds = [2, 8, 32, 128, 512, 4096]
        alpha = 0.1
        half = [
            budget_report(ModelParams(d=d, p=0.9, q=0.5), alpha).L_alg1 / (d * math.log(d / alpha))
            for d in ds
        ]
        above = [
            budget_report(ModelParams(d=d, p=0.9, q=0.7), alpha).L_alg1 / math.log(d / alpha)
            for d in ds
        ]
        for seq in (half, above):
            assert max(seq) <= 2.0 * min(seq)


class TestStageOneRecommendation:
    def test_midpoint_matches_closed_form_at_half(self):
        # midpoint equals 1/2 + (p-q)^2 / d when q = 1/2
        rec = stage1_recommendation(ModelParams(d=3, p=0.9, q=0.5), 0.1, 60)
        assert math.isclose(rec.zeta, 0.5 + 0.16 / 3, rel_tol=1e-12)

    def test_agreement_rates_example(self):
        from crowdtypes import agreement_probabilities

        same, diff = agreement_probabilities(ModelParams(d=3, p=0.9, q=0.6))
        assert math.isclose(same, 0.62, rel_tol=1e-9)
        assert math.isclose(diff, 0.56, rel_tol=1e-9)
        rec = stage1_recommendation(ModelParams(d=3, p=0.9, q=0.6), 0.1, 60)
        assert math.isclose(rec.zeta, 0.59, rel_tol=1e-9)

    def test_monotone_in_alpha(self):
        params = ModelParams(d=3, p=0.9, q=0.6)
        rs, ls = [], []
        for alpha in (0.01, 0.1, 0.5, 0.9):
            rec = stage1_recommendation(params, alpha, 60)
            rs.append(rec.r)
            ls.append(rec.l)
        assert rs == sorted(rs, reverse=True)
        assert ls == sorted(ls, reverse=True)

    def test_worker_floor(self):
        rec = stage1_recommendation(ModelParams(d=3, p=0.9, q=0.6), 0.1, 60)
        assert rec.n_min == 238
        assert rec.l == 40

    def test_needs_two_workers(self):
        with pytest.raises(InvalidParameterError):
            stage1_recommendation(ModelParams(d=2, p=0.9, q=0.6), 0.1, 1)


class TestTheoreticalErrorBounds:
    def test_clustering_bound_vanishes(self):
        params = ModelParams(d=3, p=0.9, q=0.6)
        b1 = theoretical_error_bounds(params, 10_000, 10, 100)[0]
        b2 = theoretical_error_bounds(params, 100_000, 10, 100)[0]
        assert b2 < b1 < 1
        assert b2 < 1e-12

    def test_mismatch_hand_value(self):
        got = theoretical_error_bounds(ModelParams(d=3, p=0.9, q=0.6), 100, 100, 1000)[2]
        assert math.isclose(got, 6 * math.exp(-4.5), rel_tol=1e-9)

    def test_clustering_bound_inversion(self):
        # r chosen so the exponent equals ln 2 makes the n=2 bound 1/2
        params = ModelParams(d=3, p=0.9, q=0.6)
        r = params.d ** 2 * math.log(2) / (2 * (params.p - params.q) ** 4)
        got = theoretical_error_bounds(params, r, 10, 2)[0]
        assert math.isclose(got, 0.5, rel_tol=1e-9)

    def test_undersized_bound_vacuous(self):
        params = ModelParams(d=3, p=0.9, q=0.6)
        assert theoretical_error_bounds(params, 100, 40, 120)[1] == 1.0
        assert theoretical_error_bounds(params, 100, 30, 120)[1] < 1.0

    def test_positive_arguments(self):
        with pytest.raises(InvalidParameterError):
            theoretical_error_bounds(ModelParams(d=2, p=0.9, q=0.6), 0, 1, 1)
