"""Plain and weighted majority voting with Hoeffding error bounds."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidWeightsError, NoVotesError, ShapeError
from .model import ModelParams
from .rng import substream


@dataclass(frozen=True)
class VoteOutcome:
    """Decision, the signed pre-sign sum, and whether a coin broke a tie."""

    label: int
    margin: float
    tie_broken: bool


def _tie_coin(seed: int) -> int:
    return int(substream(seed, "tiebreak").integers(0, 2)) * 2 - 1


def _check_votes(votes) -> np.ndarray:
    votes = np.asarray(votes)
    if votes.size == 0:
        raise NoVotesError("cannot vote on an empty answer set")
    if not np.isin(votes, (-1, 1)).all():
        raise ShapeError("votes must lie in {-1,+1}")
    return votes.astype(np.float64)


def majority_vote(votes, seed: int = 0) -> VoteOutcome:
    """sign(sum of votes); an exactly zero sum is settled by a seeded fair coin."""
    votes = _check_votes(votes)
    margin = float(votes.sum())
    if margin == 0.0:
        return VoteOutcome(_tie_coin(seed), margin, True)
    return VoteOutcome(1 if margin > 0 else -1, margin, False)


def weighted_majority_vote(votes, weights, seed: int = 0) -> VoteOutcome:
    """sign(sum of weight * vote) with the same seeded tie rule.

    The margin is accumulated with exact (correctly rounded) summation,
    so symmetric weight configurations cancel to a true zero and the tie
    rule fires exactly when the real-valued margin is zero.
    """
    votes = _check_votes(votes)
    weights = _check_weights(weights, votes.size)
    margin = math.fsum(weights * votes)
    if margin == 0.0:
        return VoteOutcome(_tie_coin(seed), margin, True)
    return VoteOutcome(1 if margin > 0 else -1, margin, False)


def _check_weights(weights, expected: int) -> np.ndarray:
    weights = np.asarray(weights, dtype=np.float64)
    if weights.shape != (expected,):
        raise ShapeError(f"need one weight per vote ({expected}), got {weights.shape}")
    if not np.isfinite(weights).all():
        raise InvalidWeightsError("weights must be finite")
    if (weights == 0).all():
        raise InvalidWeightsError("weights must not all be zero")
    return weights


def wmv_exponent(fidelities, weights) -> float:
    """Normalized alignment gamma = sum w(2f-1) / (||w||_2 sqrt(N)).

    The error of the weighted vote is at most exp(-gamma^2 N / 2); by
    Cauchy-Schwarz, gamma is maximized by weights proportional to 2f-1.
    """
    fidelities = np.asarray(fidelities, dtype=np.float64)
    if fidelities.size == 0:
        raise NoVotesError("need at least one fidelity")
    if fidelities.min() < 0.5 or fidelities.max() > 1.0:
        raise ShapeError("fidelities must lie in [1/2, 1]")
    weights = _check_weights(weights, fidelities.size)
    norm = float(np.linalg.norm(weights))
    if norm == 0.0:
        raise InvalidWeightsError("weight norm is zero")
    return float((weights * (2 * fidelities - 1)).sum() / (norm * np.sqrt(fidelities.size)))


def hoeffding_bound(fidelities, weights) -> float:
    """exp(-gamma^2 N / 2) for the weighted vote over N answers."""
    fidelities = np.asarray(fidelities, dtype=np.float64)
    gamma = wmv_exponent(fidelities, weights)
    # exponent kept in log space so huge N cannot underflow intermediate terms
    return float(np.exp(-0.5 * gamma * gamma * fidelities.size))


def oracle_weights(params: ModelParams, matched_flags) -> np.ndarray:
    """Optimal linear weights: 2p-1 where matched, 2q-1 otherwise."""
    matched = np.asarray(matched_flags, dtype=bool)
    return np.where(matched, 2 * params.p - 1, 2 * params.q - 1)
