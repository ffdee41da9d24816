"""Command-line interface: bounds, cluster, sweep, validate."""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np
from sklearn.metrics import adjusted_rand_score

from .budgets import budget_report, stage1_recommendation
from .clustering import Clustering, cluster_sequential, partition_equal, probe_block_from_answers
from .errors import CrowdTypesError
from .harness import (
    ExperimentConfig,
    default_output_path,
    emit_csv,
    parse_config_file,
    run_sweep,
    summarize,
    write_meta,
)
from .model import (
    AssignmentPlan,
    ModelParams,
    sample_answers,
    sample_world,
    save_answer_matrix,
    save_world,
)
from .rng import derive_seed
from .sdp import cluster_workers_sdp
from .validate import DEFAULT_SEED, run_acceptance


def _add_model_flags(parser, with_alpha=True):
    parser.add_argument("--p", type=float, required=True, help="matched-type accuracy")
    parser.add_argument("--q", type=float, required=True, help="unmatched-type accuracy")
    parser.add_argument("--d", type=int, required=True, help="number of types")
    if with_alpha:
        parser.add_argument("--alpha", type=float, required=True, help="target error fraction")


def cmd_bounds(args) -> int:
    params = ModelParams(d=args.d, p=args.p, q=args.q)
    rep = budget_report(params, args.alpha)
    print(f"query budgets for d={args.d}, p={args.p}, q={args.q}, alpha_c={args.alpha}")
    table = [
        ("oracle weighted vote", "L_oracle", rep.L_oracle),
        ("plain majority vote", "L_mv", rep.L_mv),
        ("matched-cluster vote", "L_type", rep.L_type),
        ("weighted cluster vote", "L_alg1", rep.L_alg1),
    ]
    for label, key, value in table:
        print(f"  {label:<24} {key:<9} {value:12.4f}")
    print("machine-readable:")
    pairs = [
        ("gamma_oracle", rep.gamma_oracle),
        ("gamma_mv", rep.gamma_mv),
        ("gamma_u", rep.gamma_u),
        ("gamma_m", rep.gamma_m),
        ("L_oracle", rep.L_oracle),
        ("L_mv", rep.L_mv),
        ("L_type", rep.L_type),
        ("L_alg1", rep.L_alg1),
    ]
    if args.n is not None:
        rec = stage1_recommendation(params, args.alpha, args.n)
        pairs += [("zeta", rec.zeta), ("r", rec.r), ("l", rec.l), ("n_min", rec.n_min)]
    for key, value in pairs:
        print(f"{key}={value!r}" if isinstance(value, float) else f"{key}={value}")
    return 0


def cmd_cluster(args) -> int:
    params = ModelParams(d=args.d, p=args.p, q=args.q)
    exact_count = 0
    for trial in range(args.trials):
        seed = derive_seed(args.seed, "cluster-cli", trial)
        world = sample_world(params, args.r, args.n, derive_seed(seed, "world"))
        plan = AssignmentPlan(np.arange(args.r), [np.arange(args.n)] * args.r)
        answers = sample_answers(world, params, plan, derive_seed(seed, "answers"))
        if args.dump_dir:
            os.makedirs(args.dump_dir, exist_ok=True)
            save_world(os.path.join(args.dump_dir, f"world_{trial}.txt"), world)
            save_answer_matrix(
                os.path.join(args.dump_dir, f"answers_{trial}.txt"), answers, params
            )
        block = probe_block_from_answers(answers, np.arange(args.r))
        if args.method == "threshold":
            zeta = args.zeta
            if zeta is None:
                zeta = stage1_recommendation(params, 0.1, args.n).zeta
            clustering = cluster_sequential(block, zeta)
        else:
            clustering, _ = cluster_workers_sdp(block, args.d, seed)
        truth = Clustering.from_worker_types(world.worker_types)
        exact = partition_equal(clustering, truth)
        exact_count += exact
        ari = adjusted_rand_score(truth.assignments, clustering.assignments)
        print(
            f"trial {trial}: c={clustering.c} exact={'yes' if exact else 'no'} ari={ari:.4f}"
        )
    print(f"exact recovery {exact_count}/{args.trials}")
    return 0


_SWEEP_KEYS = {
    "d": int, "p": float, "q": float, "m": int, "n": int, "trials": int,
    "alpha_c": float, "beta": float, "r": int, "zeta": float,
    "penalty": float, "tolerance": float, "max_iterations": int,
    "jacobi_tolerance": float, "seed": int,
}


def _config_from_args(args) -> ExperimentConfig:
    values: dict = {}
    if args.config:
        raw = parse_config_file(args.config)
        for key, text in raw.items():
            if key == "budgets":
                values["budgets"] = tuple(int(x) for x in text.split(","))
            elif key == "algorithms":
                values["algorithms"] = tuple(text.split(","))
            elif key in _SWEEP_KEYS:
                values[key] = _SWEEP_KEYS[key](text)
            else:
                raise CrowdTypesError(f"unknown config key {key!r}")
    for key in _SWEEP_KEYS:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    if args.budgets:
        values["budgets"] = tuple(int(x) for x in args.budgets.split(","))
    if args.algorithms:
        values["algorithms"] = tuple(args.algorithms.split(","))
    if "seed" not in values or values["seed"] is None:
        raise CrowdTypesError("--seed is required for sweep")
    return ExperimentConfig(**values)


def cmd_sweep(args) -> int:
    config = _config_from_args(args)
    out = args.out or default_output_path()
    rows = run_sweep(config)
    emit_csv(rows, out)
    write_meta(config, out)
    failures = sum(1 for r in rows if r.result is None)
    print(f"wrote {len(rows)} rows to {out} ({failures} failed cells)")
    for (algorithm, budget), (mean, se, count) in sorted(summarize(rows).items()):
        print(f"  {algorithm:<11} budget={budget:<4} error={mean:.4f} se={se:.4f} n={count}")
    return 0


def cmd_validate(args) -> int:
    only = set(args.only.split(",")) if args.only else None
    results, _ = run_acceptance(seed=args.seed, quick=args.quick, only=only)
    for res in results:
        print(res.line())
    passed = sum(r.passed for r in results)
    print(f"{passed}/{len(results)} checks passed")
    return 0 if passed == len(results) else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="crowdtypes",
        description="Crowdsourced labeling under the d-type specialization model",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_bounds = sub.add_parser("bounds", help="print query-budget formulas")
    _add_model_flags(p_bounds)
    p_bounds.add_argument("--n", type=int, default=None, help="worker count for probe-phase settings")
    p_bounds.set_defaults(func=cmd_bounds)

    p_cluster = sub.add_parser("cluster", help="run the worker-clustering phase only")
    _add_model_flags(p_cluster, with_alpha=False)
    p_cluster.add_argument("--n", type=int, required=True)
    p_cluster.add_argument("--r", type=int, required=True, help="probe tasks answered by everyone")
    p_cluster.add_argument("--method", choices=("threshold", "sdp"), default="threshold")
    p_cluster.add_argument("--zeta", type=float, default=None)
    p_cluster.add_argument("--trials", type=int, default=1)
    p_cluster.add_argument("--dump-dir", default=None, help="save sampled worlds and answers here")
    p_cluster.add_argument("--seed", type=int, required=True)
    p_cluster.set_defaults(func=cmd_cluster)

    p_sweep = sub.add_parser("sweep", help="Monte Carlo sweep over algorithms and budgets")
    p_sweep.add_argument("--config", default=None, help="key=value config file (flags override)")
    for key, typ in _SWEEP_KEYS.items():
        p_sweep.add_argument(f"--{key}", type=typ, default=None)
    p_sweep.add_argument("--budgets", default=None, help="comma-separated queries per task")
    p_sweep.add_argument("--algorithms", default=None, help="comma-separated algorithm names")
    p_sweep.add_argument("--out", default=None, help="output CSV path")
    p_sweep.set_defaults(func=cmd_sweep)

    p_val = sub.add_parser("validate", help="run the acceptance property suite")
    p_val.add_argument("--quick", action="store_true", help="reduced trial counts")
    p_val.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p_val.add_argument("--only", default=None, help="comma-separated check names")
    p_val.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except CrowdTypesError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
