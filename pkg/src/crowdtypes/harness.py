"""Experiment configuration, Monte Carlo sweeps, and CSV emission.

A sweep runs every (algorithm, budget, trial) cell on a fresh world.
The trial seed is derived from (base seed, budget, trial) only, so all
algorithms see identical worlds, assignments, answers, and tie coins
within a cell; cross-algorithm comparisons are paired.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field, fields

import numpy as np

from ._version import __version__
from .budgets import stage1_recommendation
from .errors import InvalidParameterError
from .inference import ALGORITHMS, BudgetKnobs, ExperimentResult, run_pipeline
from .model import ModelParams, sample_world
from .rng import derive_seed
from .sdp import SdpSolverConfig

CSV_HEADER = "algorithm,budget_queries_per_task,trial,error_fraction,clustering_ok,p_hat,q_hat,seed"

DIAG_HEADER = (
    "algorithm,budget_queries_per_task,trial,queries_amortized,queries_eval_mean,"
    "error_fraction_all,n_clusters,wall_time,failure"
)

OUTPUT_DIR_ENV = "CROWDTYPES_OUTDIR"


@dataclass
class ExperimentConfig:
    """Settings of one Monte Carlo sweep."""

    d: int = 3
    p: float = 0.9
    q: float = 0.6
    m: int = 2000
    n: int = 60
    budgets: tuple = (12, 21, 30, 39, 51, 60)
    algorithms: tuple = ALGORITHMS
    trials: int = 30
    alpha_c: float = 0.1
    beta: float = 0.3
    r: int | None = None
    zeta: float | None = None
    penalty: float = 1.0
    tolerance: float = 1e-4
    max_iterations: int = 2000
    jacobi_tolerance: float = 1e-10
    seed: int = 0

    def __post_init__(self):
        self.budgets = tuple(int(b) for b in self.budgets)
        self.algorithms = tuple(self.algorithms)
        self.params()  # validates (d, p, q)
        if self.trials < 1:
            raise InvalidParameterError("need at least one trial")
        if not self.budgets:
            raise InvalidParameterError("budget sweep must be non-empty")
        if min(self.budgets) < 1:
            raise InvalidParameterError("budgets must be positive")
        unknown = set(self.algorithms) - set(ALGORITHMS)
        if unknown:
            raise InvalidParameterError(f"unknown algorithms: {sorted(unknown)}")
        clustered = set(self.algorithms) & {"prior", "alg1", "alg2"}
        if clustered and any(b % self.d for b in self.budgets):
            raise InvalidParameterError(
                "budgets must be multiples of d so clustered and uniform "
                "algorithms spend equal queries per task"
            )
        if not (0 < self.beta < 1):
            raise InvalidParameterError("beta must lie in (0,1)")

    def params(self) -> ModelParams:
        return ModelParams(d=self.d, p=self.p, q=self.q)

    def solver(self) -> SdpSolverConfig:
        return SdpSolverConfig(
            penalty=self.penalty,
            tolerance=self.tolerance,
            max_iterations=self.max_iterations,
            jacobi_tolerance=self.jacobi_tolerance,
        )

    def probe_depth(self) -> int:
        """Configured r, else the recommended depth capped at m/2.

        The theoretical depth assumes m >> n^3; at desk scale it can
        exceed m, so the auto policy caps it to keep tasks for voting.
        """
        if self.r is not None:
            return self.r
        rec = stage1_recommendation(self.params(), self.alpha_c, self.n)
        return max(1, min(rec.r, self.m // 2))

    def knobs_for(self, budget: int) -> BudgetKnobs:
        return BudgetKnobs(
            r=self.probe_depth(),
            l=max(1, budget // self.d),
            k=budget,
            beta=self.beta,
            zeta=self.zeta,
            solver=self.solver(),
        )

    def meta(self) -> dict:
        out = {f.name: getattr(self, f.name) for f in fields(self)}
        out["budgets"] = ",".join(str(b) for b in self.budgets)
        out["algorithms"] = ",".join(self.algorithms)
        out["r_effective"] = self.probe_depth()
        out["version"] = __version__
        # desk-scale runs sit far below the asymptotic regime m >= c n^3
        out["asymptotic_regime"] = self.m >= self.n ** 3
        return out


@dataclass
class SweepRow:
    """One (algorithm, budget, trial) cell of the result table."""

    algorithm: str
    budget: int
    trial: int
    seed: int
    result: ExperimentResult | None
    failure: str | None = None


def run_trial(config: ExperimentConfig, algorithm: str, budget: int, trial: int,
              keep_predictions: bool = False) -> SweepRow:
    trial_seed = derive_seed(config.seed, "trial", budget, trial)
    params = config.params()
    try:
        world = sample_world(params, config.m, config.n, derive_seed(trial_seed, "world"))
        result = run_pipeline(
            world, params, algorithm, config.knobs_for(budget), trial_seed,
            keep_predictions=keep_predictions,
        )
        return SweepRow(algorithm, budget, trial, trial_seed, result)
    except Exception as exc:  # noqa: BLE001 - one bad cell must not kill the sweep
        return SweepRow(algorithm, budget, trial, trial_seed, None, failure=repr(exc))


def run_sweep(config: ExperimentConfig, progress=None) -> list[SweepRow]:
    """Run all cells in deterministic (algorithm, budget, trial) order."""
    rows = []
    for algorithm in config.algorithms:
        for budget in config.budgets:
            for trial in range(config.trials):
                rows.append(run_trial(config, algorithm, budget, trial))
                if progress is not None:
                    progress(rows[-1])
    return rows


def summarize(rows: list[SweepRow]):
    """Mean error and standard error per (algorithm, budget), failures dropped."""
    cells: dict[tuple[str, int], list[float]] = {}
    for row in rows:
        if row.result is None:
            continue
        cells.setdefault((row.algorithm, row.budget), []).append(row.result.error_fraction)
    out = {}
    for key, errs in cells.items():
        arr = np.asarray(errs)
        se = float(arr.std(ddof=1) / math.sqrt(arr.size)) if arr.size > 1 else float("inf")
        out[key] = (float(arr.mean()), se, arr.size)
    return out


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def emit_csv(rows: list[SweepRow], path) -> None:
    """Write the result table; re-running the same config is byte-identical.

    A companion ``<stem>_diagnostics.csv`` carries the realized query
    accounting (amortized including the probe phase, and per evaluated
    task) plus wall times and failure strings.
    """
    path = os.fspath(path)
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(CSV_HEADER + "\n")
        for row in rows:
            res = row.result
            fh.write(
                ",".join(
                    [
                        row.algorithm,
                        str(row.budget),
                        str(row.trial),
                        _fmt(res.error_fraction if res else None),
                        _fmt(res.clustering_ok if res else None),
                        _fmt(res.p_hat if res else None),
                        _fmt(res.q_hat if res else None),
                        str(row.seed),
                    ]
                )
                + "\n"
            )
    stem, ext = os.path.splitext(path)
    with open(f"{stem}_diagnostics{ext or '.csv'}", "w", encoding="ascii", newline="\n") as fh:
        fh.write(DIAG_HEADER + "\n")
        for row in rows:
            res = row.result
            fh.write(
                ",".join(
                    [
                        row.algorithm,
                        str(row.budget),
                        str(row.trial),
                        _fmt(res.queries_per_task if res else None),
                        _fmt(res.queries_eval_mean if res else None),
                        _fmt(res.error_fraction_all if res else None),
                        _fmt(res.n_clusters if res else None),
                        _fmt(res.wall_time if res else None),
                        row.failure or "",
                    ]
                )
                + "\n"
            )


def write_meta(config: ExperimentConfig, path) -> None:
    """key=value sidecar used by plotting to label panels (e.g. by q)."""
    meta = config.meta()
    with open(os.fspath(path) + ".meta", "w", encoding="ascii", newline="\n") as fh:
        for key in sorted(meta):
            fh.write(f"{key}={_fmt(meta[key])}\n")


def parse_config_file(path) -> dict:
    """Flat key=value file mirroring the sweep flag names."""
    out = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise InvalidParameterError(f"{path}:{lineno}: expected key=value")
            key, value = line.split("=", 1)
            out[key.strip()] = value.strip()
    return out


def default_output_path(name: str = "sweep.csv") -> str:
    base = os.environ.get(OUTPUT_DIR_ENV, ".")
    return os.path.join(base, name)
