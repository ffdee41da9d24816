"""Acceptance property suite.

Each check mirrors one acceptance criterion with its tolerances pinned;
the CLI ``validate`` subcommand prints one pass/fail line per check and
the pytest acceptance module asserts them individually.  Checks are
deterministic given the base seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .budgets import budget_report, stage1_recommendation, theoretical_error_bounds
from .clustering import Clustering, cluster_sequential, partition_equal, probe_block_from_answers
from .errors import CrowdTypesError
from .harness import ExperimentConfig, SweepRow, run_sweep, summarize
from .inference import BudgetKnobs, estimate_pq, run_pipeline, split_workers
from .model import (
    AssignmentPlan,
    ModelParams,
    World,
    assign_budgeted,
    sample_answers,
    sample_world,
)
from .rng import derive_seed, substream
from .sdp import (
    cluster_workers_sdp,
    consistency_probe_tasks,
    jacobi_eigh,
    solve_sdp,
    tuning_window,
)

DEFAULT_SEED = 1729

BUDGET_GRID_P = (0.7, 0.8, 0.9, 1.0)
BUDGET_GRID_Q = (0.5, 0.55, 0.6, 0.7)
BUDGET_GRID_D = (2, 3, 5, 10)
BUDGET_GRID_ALPHA = (0.01, 0.1)

BENCHMARK_BUDGETS = (12, 21, 30, 39, 51, 60)


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.name}: {self.detail}"


def check_budget_grid() -> CheckResult:
    """Criterion 1: grid orderings plus spot values at 1e-6 relative."""
    violations = []
    for d in BUDGET_GRID_D:
        for p in BUDGET_GRID_P:
            for q in BUDGET_GRID_Q:
                if q >= p:
                    continue
                for alpha in BUDGET_GRID_ALPHA:
                    rep = budget_report(ModelParams(d=d, p=p, q=q), alpha)
                    if rep.L_oracle > rep.L_mv * (1 + 1e-12):
                        violations.append(f"L_oracle>L_mv at {(p, q, d, alpha)}")
                    if rep.L_alg1 > rep.L_type * (1 + 1e-12):
                        violations.append(f"L_alg1>L_type at {(p, q, d, alpha)}")
    rep = budget_report(ModelParams(d=3, p=0.9, q=0.6), 0.1)
    spots = (
        ("gamma_u", rep.gamma_u, 0.09),
        ("L_oracle", rep.L_oracle, 6 / 0.72 * math.log(10)),
        ("L_mv", rep.L_mv, 12.5 * math.log(10)),
    )
    for name, got, want in spots:
        if abs(got - want) > 1e-6 * abs(want):
            violations.append(f"spot {name}: got {got!r}, want {want!r}")
    detail = (
        f"{len(violations)} violation(s)"
        + (": " + "; ".join(violations[:6]) + ("..." if len(violations) > 6 else "") if violations else "")
    )
    return CheckResult("criterion-1 budget-formula grid", not violations, detail)


def check_collapse(seed: int = DEFAULT_SEED, trials: int = 3) -> CheckResult:
    """Criterion 2: prior and alg1 labels identical when q = 1/2."""
    mismatches = []
    knobs = BudgetKnobs(r=400, l=10)
    for p in (0.85, 0.9):
        params = ModelParams(d=3, p=p, q=0.5)
        for t in range(trials):
            s = derive_seed(seed, "collapse", int(p * 100), t)
            world = sample_world(params, 1500, 60, derive_seed(s, "world"))
            prior = run_pipeline(world, params, "prior", knobs, s, keep_predictions=True)
            alg1 = run_pipeline(world, params, "alg1", knobs, s, keep_predictions=True)
            if not np.array_equal(prior.predictions, alg1.predictions):
                diff = int((prior.predictions != alg1.predictions).sum())
                mismatches.append(f"p={p} trial={t}: {diff} labels differ")
    detail = "exact label equality" if not mismatches else "; ".join(mismatches)
    return CheckResult("criterion-2 q=1/2 collapse", not mismatches, detail)


def benchmark_config(seed: int, trials: int = 30, budgets=BENCHMARK_BUDGETS, q: float = 0.7) -> ExperimentConfig:
    return ExperimentConfig(
        d=3, p=0.9, q=q, m=2000, n=60,
        budgets=budgets, algorithms=("mv", "oracle_wmv", "prior", "alg1", "alg2"),
        trials=trials, alpha_c=0.1, beta=0.3, seed=seed,
    )


def _se_gap(a, b):
    return 3.0 * math.sqrt(a[1] ** 2 + b[1] ** 2)


def check_benchmark_orderings(rows: list[SweepRow], budgets=BENCHMARK_BUDGETS) -> CheckResult:
    """Criterion 3: mean-error orderings and the alg2-alg1 gap per budget."""
    stats = summarize(rows)
    violations = []
    for budget in budgets:
        cell = {alg: stats.get((alg, budget)) for alg in ("mv", "oracle_wmv", "prior", "alg1", "alg2")}
        missing = [alg for alg, v in cell.items() if v is None]
        if missing:
            violations.append(f"budget {budget}: no data for {missing}")
            continue
        pairs = (
            ("oracle_wmv", "alg1"),
            ("alg1", "prior"),
            ("alg1", "mv"),
        )
        for lo, hi in pairs:
            if cell[lo][0] > cell[hi][0] + _se_gap(cell[lo], cell[hi]):
                violations.append(
                    f"budget {budget}: {lo}={cell[lo][0]:.4f} > {hi}={cell[hi][0]:.4f}+3se"
                )
        gap = abs(cell["alg2"][0] - cell["alg1"][0])
        if gap > 0.02:
            violations.append(f"budget {budget}: |alg2-alg1|={gap:.4f} > 0.02")
    detail = "orderings hold at all budgets" if not violations else "; ".join(violations)
    return CheckResult("criterion-3 benchmark orderings", not violations, detail)


def check_recommended_settings(seed: int = DEFAULT_SEED, trials: int = 30, m: int = 10000,
                   min_pass: int | None = None) -> CheckResult:
    """Criterion 4: recommended (zeta, r, l, n) reach error <= 0.1."""
    params = ModelParams(d=3, p=0.9, q=0.6)
    alpha = 0.1
    n = stage1_recommendation(params, alpha, 2).n_min
    rec = stage1_recommendation(params, alpha, n)
    knobs = BudgetKnobs(r=rec.r, l=rec.l, zeta=rec.zeta)
    if min_pass is None:
        min_pass = math.ceil(27 / 30 * trials)
    hits = 0
    worst = 0.0
    for t in range(trials):
        s = derive_seed(seed, "end-to-end", t)
        world = sample_world(params, m, n, derive_seed(s, "world"))
        result = run_pipeline(world, params, "alg1", knobs, s)
        worst = max(worst, result.error_fraction_all)
        hits += result.error_fraction_all <= alpha
    detail = (
        f"{hits}/{trials} trials at error<=0.1 (need {min_pass}); "
        f"n={n} r={rec.r} l={rec.l} zeta={rec.zeta:.4f}; worst={worst:.4f}"
    )
    return CheckResult("criterion-4 recommended-settings end-to-end", hits >= min_pass, detail)


BOUND_GRID = ((3000, 60), (5000, 60), (7000, 60), (5000, 100), (7000, 100), (7000, 160))


def check_bound_grid(seed: int = DEFAULT_SEED, trials: int = 30) -> CheckResult:
    """Criterion 5: empirical clustering-failure and type-mismatch rates
    stay below their closed-form bounds plus 3 sigma on a 6-point grid."""
    params = ModelParams(d=3, p=0.9, q=0.6)
    n = 60
    zeta = stage1_recommendation(params, 0.1, n).zeta
    violations = []
    details = []
    for r, l in BOUND_GRID:
        cluster_bound, _, mismatch_bound = theoretical_error_bounds(params, r, l, n)
        fails = 0
        for t in range(trials):
            s = derive_seed(seed, "bound-grid", r, l, t)
            world = sample_world(params, r, n, derive_seed(s, "world"))
            plan = AssignmentPlan(np.arange(r), [np.arange(n)] * r)
            answers = sample_answers(world, params, plan, derive_seed(s, "answers"))
            block = probe_block_from_answers(answers, np.arange(r))
            got = cluster_sequential(block, zeta)
            truth = Clustering.from_worker_types(world.worker_types)
            fails += not partition_equal(got, truth)
        freq = fails / trials
        sigma = math.sqrt(freq * (1 - freq) / trials)
        if freq > min(cluster_bound, 1.0) + 3 * sigma:
            violations.append(f"clustering r={r}: {freq:.4f} > bound {cluster_bound:.4f}+3s")
        mism, total = _mismatch_frequency(params, l, seed, trials)
        freq_m = mism / total
        sigma_m = math.sqrt(freq_m * (1 - freq_m) / total)
        if freq_m > min(mismatch_bound, 1.0) + 3 * sigma_m:
            violations.append(f"mismatch l={l}: {freq_m:.6f} > bound {mismatch_bound:.6f}+3s")
        details.append(f"(r={r},l={l}): clust {freq:.3f}<={min(cluster_bound, 1.0):.3f}, "
                       f"mism {freq_m:.5f}<={min(mismatch_bound, 1.0):.5f}")
    detail = "; ".join(violations) if violations else "; ".join(details[:3]) + " ..."
    return CheckResult("criterion-5 bound satisfaction grid", not violations, detail)


def _mismatch_frequency(params: ModelParams, l: int, seed: int, trials: int, m: int = 400):
    """Type-mismatch rate with exactly l workers per type, all assigned."""
    d = params.d
    n = l * d
    worker_types = np.repeat(np.arange(1, d + 1), l).astype(np.int32)
    mism = 0
    total = 0
    for t in range(trials):
        s = derive_seed(seed, "mismatch", l, t)
        rng = substream(s, "truth")
        labels = rng.integers(0, 2, size=m).astype(np.int8) * 2 - 1
        task_types = rng.integers(1, d + 1, size=m).astype(np.int32)
        world = World(labels, task_types, worker_types)
        plan = AssignmentPlan(np.arange(m), [np.arange(n)] * m)
        answers = sample_answers(world, params, plan, derive_seed(s, "answers"))
        clustering = Clustering.from_worker_types(worker_types)
        from .inference import cluster_tallies

        signed, _, _ = cluster_tallies(answers, clustering)
        z_star = np.argmax(np.abs(signed), axis=1) + 1
        mism += int((z_star != task_types).sum())
        total += m
    return mism, total


def check_sdp_recovery(seed: int = DEFAULT_SEED, trials: int = 30, window_misses: int = 2) -> CheckResult:
    """Criterion 6: SDP pipeline recovery rate and data-driven tuning window."""
    params = ModelParams(d=3, p=0.9, q=0.6)
    n = 60
    r = consistency_probe_tasks(params, n, c1=1.0)
    lo, hi = tuning_window(params, r)
    exact = 0
    in_window = 0
    for t in range(trials):
        s = derive_seed(seed, "sdp-recovery", t)
        world = sample_world(params, r, n, derive_seed(s, "world"))
        plan = AssignmentPlan(np.arange(r), [np.arange(n)] * r)
        answers = sample_answers(world, params, plan, derive_seed(s, "answers"))
        block = probe_block_from_answers(answers, np.arange(r))
        clustering, densities = cluster_workers_sdp(block, params.d, s)
        truth = Clustering.from_worker_types(world.worker_types)
        exact += partition_equal(clustering, truth)
        in_window += lo <= densities.lambda_tune <= hi
    freq = exact / trials
    sigma = math.sqrt(freq * (1 - freq) / trials)
    target = 1 - 4 / n - 3 * sigma
    need_window = trials - window_misses
    ok = freq >= target and in_window >= need_window
    detail = (
        f"recovery {exact}/{trials} (need >= {target:.4f}), "
        f"lambda in window {in_window}/{trials} (need {need_window}); r={r}"
    )
    return CheckResult("criterion-6 SDP consistency rate", ok, detail)


def check_sdp_unit(seed: int = DEFAULT_SEED) -> CheckResult:
    """Criterion 7: noiseless block recovery and eigensolver oracle match."""
    issues = []
    r = 10
    a = np.array(
        [
            [0, r, -r, -r],
            [r, 0, -r, -r],
            [-r, -r, 0, r],
            [-r, -r, r, 0],
        ],
        dtype=float,
    )
    target = np.zeros((4, 4))
    target[:2, :2] = 1.0
    target[2:, 2:] = 1.0
    solution = solve_sdp(a, 0.0)
    err = float(np.linalg.norm(solution.matrix - target))
    if err > 1e-3:
        issues.append(f"block recovery frobenius {err:.2e} > 1e-3")
    rng = substream(seed, "eig-oracle")
    worst = 0.0
    for _ in range(50):
        n = int(rng.integers(2, 31))
        mat = rng.normal(size=(n, n))
        mat = mat + mat.T
        got, _ = jacobi_eigh(mat)
        want = np.linalg.eigvalsh(mat)[::-1]
        scale = max(np.abs(want).max(), 1e-12)
        worst = max(worst, float(np.abs(got - want).max() / scale))
    if worst > 1e-6:
        issues.append(f"eigensolver deviation {worst:.2e} > 1e-6")
    detail = "; ".join(issues) if issues else f"block err {err:.1e}, eig dev {worst:.1e}"
    return CheckResult("criterion-7 SDP solver unit", not issues, detail)


def check_estimator(seed: int = DEFAULT_SEED, trials: int = 30, min_pass: int | None = None) -> CheckResult:
    """Criterion 8: plug-in estimates within 0.03 given perfect clustering."""
    params = ModelParams(d=3, p=0.9, q=0.6)
    m, n, l, beta = 5000, 60, 10, 0.3
    if min_pass is None:
        min_pass = math.ceil(27 / 30 * trials)
    hits = 0
    deviations = []
    for t in range(trials):
        s = derive_seed(seed, "estimator", t)
        world = sample_world(params, m, n, derive_seed(s, "world"))
        clustering = Clustering.from_worker_types(world.worker_types)
        plan = assign_budgeted(clustering, np.arange(m), l * params.d, derive_seed(s, "assign"))
        answers = sample_answers(world, params, plan, derive_seed(s, "answers"))
        split = split_workers(clustering, beta, s)
        est = estimate_pq(answers, clustering, split)
        dev_p = abs(est.p_hat - params.p)
        dev_q = abs(est.q_hat - params.q)
        deviations.append((dev_p, dev_q))
        hits += dev_p <= 0.03 and dev_q <= 0.03
    mean_p = float(np.mean([d[0] for d in deviations]))
    mean_q = float(np.mean([d[1] for d in deviations]))
    detail = (
        f"{hits}/{trials} trials within 0.03 (need {min_pass}); "
        f"mean |p_hat-p|={mean_p:.4f}, mean |q_hat-q|={mean_q:.4f}"
    )
    return CheckResult("criterion-8 estimator consistency", hits >= min_pass, detail)


def check_hoeffding(rows: list[SweepRow], budgets=BENCHMARK_BUDGETS) -> CheckResult:
    """Criterion 9: oracle-vote error below its Hoeffding bound everywhere."""
    violations = []
    seen = []
    for budget in budgets:
        cells = [r for r in rows if r.algorithm == "oracle_wmv" and r.budget == budget and r.result]
        if not cells:
            violations.append(f"budget {budget}: no oracle rows")
            continue
        err = float(np.mean([c.result.error_fraction for c in cells]))
        bound = float(np.mean([c.result.hoeffding_bound_mean for c in cells]))
        total = sum(c.result.n_eval_tasks for c in cells)
        sigma = math.sqrt(max(bound * (1 - bound), 1e-12) / total)
        if err > bound + 3 * sigma:
            violations.append(f"budget {budget}: err {err:.5f} > bound {bound:.5f}+3s")
        seen.append(f"{budget}: {err:.4f}<={bound:.4f}")
    detail = "; ".join(violations) if violations else "; ".join(seen)
    return CheckResult("criterion-9 hoeffding conformance", not violations, detail)


def run_acceptance(seed: int = DEFAULT_SEED, quick: bool = False, only: set[str] | None = None):
    """Run the acceptance checks; returns (results, benchmark sweep rows)."""
    trials = 6 if quick else 30
    budgets = (12, 30, 60) if quick else BENCHMARK_BUDGETS
    results: list[CheckResult] = []
    rows: list[SweepRow] = []

    def wanted(name: str) -> bool:
        return only is None or name in only

    def guard(name: str, fn):
        if not wanted(name):
            return
        try:
            results.append(fn())
        except CrowdTypesError as exc:
            results.append(CheckResult(name, False, f"raised {exc!r}"))

    guard("budget_grid", check_budget_grid)
    guard("collapse", lambda: check_collapse(seed, trials=2 if quick else 3))
    if wanted("benchmark") or wanted("hoeffding"):
        rows = run_sweep(benchmark_config(seed, trials=trials, budgets=budgets))
        guard("benchmark", lambda: check_benchmark_orderings(rows, budgets=budgets))
        guard("hoeffding", lambda: check_hoeffding(rows, budgets=budgets))
    guard("end_to_end", lambda: check_recommended_settings(seed, trials=5 if quick else 30))
    guard("bound_grid", lambda: check_bound_grid(seed, trials=8 if quick else 30))
    guard("sdp_recovery", lambda: check_sdp_recovery(seed, trials=8 if quick else 30, window_misses=1 if quick else 2))
    guard("sdp_unit", lambda: check_sdp_unit(seed))
    guard("estimator", lambda: check_estimator(seed, trials=5 if quick else 30))
    return results, rows
