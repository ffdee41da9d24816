"""Closed-form query budgets, error exponents, and probe-phase settings.

All formulas return real values; callers round up to integers only when
allocating actual queries, which keeps the formula tests exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import InvalidParameterError
from .model import ModelParams, agreement_probabilities


def gamma_unmatched(params: ModelParams) -> float:
    """Exponent retained when the matched cluster is misidentified.

    (2(2p-1)(2q-1) + (d-2)(2q-1)^2)^2 / (2((2p-1)^2 + (d-1)(2q-1)^2)).
    Zero exactly when the mixed term 2(2p-1)(2q-1) + (d-2)(2q-1)^2 is
    zero, which happens at q = 1/2; positive for q > 1/2.
    """
    p, q, d = params.p, params.q, params.d
    gp, gq = 2 * p - 1, 2 * q - 1
    num = 2 * gp * gq + (d - 2) * gq * gq
    return num * num / (2 * (gp * gp + (d - 1) * gq * gq))


def gamma_matched(params: ModelParams) -> float:
    """Exponent when clustering and type matching are both correct."""
    p, q, d = params.p, params.q, params.d
    gp, gq = 2 * p - 1, 2 * q - 1
    return (gp * gp + (d - 1) * gq * gq) / 2


@dataclass(frozen=True)
class BudgetReport:
    """Queries per task required by each strategy at target error alpha_c."""

    gamma_oracle: float
    gamma_mv: float
    gamma_u: float
    gamma_m: float
    L_oracle: float
    L_mv: float
    L_type: float
    L_alg1: float
    alpha_c: float


def budget_report(params: ModelParams, alpha_c: float) -> BudgetReport:
    """Evaluate all budget formulas at the given parameters."""
    if not (0.0 < alpha_c < 1.0):
        raise InvalidParameterError(f"alpha_c must lie in (0,1), got {alpha_c}")
    p, q, d = params.p, params.q, params.d
    gp, gq = 2 * p - 1, 2 * q - 1
    gap = p - q
    ln_inv = math.log(1.0 / alpha_c)
    gamma_oracle = math.sqrt((gp * gp + (d - 1) * gq * gq) / d)
    gamma_mv = (gp + (d - 1) * gq) / d
    g_u = gamma_unmatched(params)
    g_m = gamma_matched(params)
    L_oracle = 2 * d / (gp * gp + (d - 1) * gq * gq) * ln_inv
    L_mv = 2 * d * d / (gp + (d - 1) * gq) ** 2 * ln_inv
    L_type = min(
        2 * d / (gap * gap / 2 + gq * gq / 2) * math.log((6 * d + 3) / alpha_c),
        2 * d / (gap * gap / 2) * math.log(6 * d / alpha_c),
    )
    L_alg1 = 2 * d / (gap * gap / 2 + g_u) * math.log((6 * d + 3) / alpha_c)
    return BudgetReport(
        gamma_oracle=gamma_oracle,
        gamma_mv=gamma_mv,
        gamma_u=g_u,
        gamma_m=g_m,
        L_oracle=L_oracle,
        L_mv=L_mv,
        L_type=L_type,
        L_alg1=L_alg1,
        alpha_c=alpha_c,
    )


@dataclass(frozen=True)
class StageOneRecommendation:
    """Probe-phase settings that make the end-to-end error guarantee hold."""

    zeta: float
    r: int
    l: int
    n_min: int

    def __post_init__(self):
        if not (0.5 < self.zeta < 1.0):
            raise InvalidParameterError("zeta must lie in (1/2, 1)")
        if min(self.r, self.l, self.n_min) < 1:
            raise InvalidParameterError("r, l, n_min must be positive")


def stage1_recommendation(params: ModelParams, alpha_c: float, n: int) -> StageOneRecommendation:
    """Threshold, probe depth, per-cluster queries, and minimum worker count.

    zeta is the midpoint of the same-type and cross-type agreement
    probabilities; r and l come from the concentration analysis behind
    the end-to-end guarantee, and n_min is the worker count it assumes.
    """
    if not (0.0 < alpha_c < 1.0):
        raise InvalidParameterError(f"alpha_c must lie in (0,1), got {alpha_c}")
    if n < 2:
        raise InvalidParameterError("need n >= 2 workers")
    p, q, d = params.p, params.q, params.d
    same, diff = agreement_probabilities(params)
    zeta = 0.5 * (same + diff)
    gap = p - q
    r = math.ceil(d * d / (2 * gap ** 4) * math.log(3 * n * (n - 1) / (2 * alpha_c)))
    g_u = gamma_unmatched(params)
    l = math.ceil(1.0 / (gap * gap / 2 + g_u) * math.log((6 * d + 3) / alpha_c))
    L_alg1 = 2 * d / (gap * gap / 2 + g_u) * math.log((6 * d + 3) / alpha_c)
    n_min = math.ceil(max(8 * d * math.log(3 * d / alpha_c), L_alg1))
    return StageOneRecommendation(zeta=zeta, r=r, l=l, n_min=n_min)


def theoretical_error_bounds(params: ModelParams, r: int, l: int, n: int) -> tuple[float, float, float]:
    """Union bounds on clustering failure, undersized types, type mismatch.

    Returns (C(n,2) exp(-2(p-q)^4 r / d^2),
             d exp(-(1 - ld/n)^2 n / (2d))   [1 when ld >= n],
             2d exp(-(p-q)^2 l / 2)).
    """
    if min(r, l, n) <= 0:
        raise InvalidParameterError("r, l, n must be positive")
    p, q, d = params.p, params.q, params.d
    gap = p - q
    clustering = n * (n - 1) / 2 * math.exp(-2 * gap ** 4 * r / (d * d))
    if l * d >= n:
        undersized = 1.0
    else:
        undersized = d * math.exp(-((1 - l * d / n) ** 2) * n / (2 * d))
    mismatch = 2 * d * math.exp(-(gap * gap) * l / 2)
    return clustering, undersized, mismatch
