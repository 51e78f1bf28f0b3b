"""Candidate scoring: cosine similarity, degeneration penalty, faithfulness
reward, and the composite objective that re-ranks the top-k candidates.

All functions are pure and stateless. Hidden vectors are 1-D float arrays;
stacks of them are 2-D arrays with one vector per row.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .backend.base import NextDistribution

MASS_TOL = 1e-9


@dataclass(frozen=True)
class MixWeights:
    """Non-negative mixing weights; alpha + beta may not exceed 1 so the
    confidence term keeps a non-negative coefficient."""

    alpha: float
    beta: float

    def __post_init__(self) -> None:
        if self.alpha < 0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")
        if self.beta < 0:
            raise ValueError(f"beta must be >= 0, got {self.beta}")
        if self.alpha + self.beta > 1:
            raise ValueError(f"alpha+beta exceeds 1 (got {self.alpha + self.beta})")


class Candidate(NamedTuple):
    token_id: int
    probability: float
    hidden: Optional[np.ndarray]


@dataclass(frozen=True)
class CandidateSet:
    """The top-k candidate tokens with their full-softmax probabilities."""

    items: tuple[Candidate, ...]
    k: int

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if not 1 <= len(self.items) <= self.k:
            raise ValueError(f"expected between 1 and {self.k} candidates, got {len(self.items)}")
        probs = [c.probability for c in self.items]
        if any(p2 > p1 for p1, p2 in zip(probs, probs[1:])):
            raise ValueError("candidate probabilities must be non-increasing")
        ids = [c.token_id for c in self.items]
        if len(set(ids)) != len(ids):
            raise ValueError("candidate token ids must be unique")


@dataclass(frozen=True)
class ScoreBreakdown:
    token_id: int
    confidence: float
    penalty: float
    reward: float
    total: float


def cosine_similarity(u: np.ndarray, v: np.ndarray) -> float:
    """dot(u, v) / (|u| * |v|); 0.0 when either vector has zero norm."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise ValueError(f"length mismatch: {u.shape} vs {v.shape}")
    if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
        raise ValueError("cosine similarity requires finite inputs")
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        return 0.0
    # Rounding can push the quotient a few ulps past the mathematical bound.
    return float(np.clip(np.dot(u, v) / (nu * nv), -1.0, 1.0))


def _max_cosine(h_v: np.ndarray, others: np.ndarray) -> float:
    """Max cosine similarity between ``h_v`` and each row of ``others``."""
    h_v = np.asarray(h_v, dtype=np.float64)
    others = np.asarray(others, dtype=np.float64)
    if others.ndim != 2 or others.shape[1] != h_v.shape[0]:
        raise ValueError(f"dimension mismatch: {others.shape} vs {h_v.shape}")
    nv = float(np.linalg.norm(h_v))
    if nv == 0.0:
        return 0.0
    norms = np.linalg.norm(others, axis=1)
    sims = np.zeros(len(others))
    nonzero = norms > 0.0
    sims[nonzero] = (others[nonzero] @ h_v) / (norms[nonzero] * nv)
    return float(np.clip(sims.max(), -1.0, 1.0))


def degeneration_penalty(h_v: np.ndarray, generated: Sequence[np.ndarray] | np.ndarray) -> float:
    """Max cosine similarity against previously generated tokens; 0 when none."""
    generated = np.asarray(generated, dtype=np.float64)
    if generated.size == 0:
        return 0.0
    return _max_cosine(h_v, generated)


def faithfulness_reward(h_v: np.ndarray, source: Sequence[np.ndarray] | np.ndarray) -> float:
    """Max cosine similarity against the source tokens; the source span is required."""
    source = np.asarray(source, dtype=np.float64)
    if source.size == 0:
        raise ValueError("faithfulness reward requires a non-empty source span")
    return _max_cosine(h_v, source)


def fecs_score(confidence: float, penalty: float, reward: float, w: MixWeights) -> float:
    """(1 - alpha - beta) * confidence - alpha * penalty + beta * reward.

    With beta == 0 this is exactly the contrastive-search objective
    (1 - alpha) * confidence - alpha * penalty, and with alpha == beta == 0 it
    reduces to the model confidence alone.
    """
    if not 0.0 <= confidence <= 1.0:
        raise ValueError(f"confidence {confidence} outside [0, 1]")
    if not -1.0 <= penalty <= 1.0:
        raise ValueError(f"penalty {penalty} outside [-1, 1]")
    if not -1.0 <= reward <= 1.0:
        raise ValueError(f"reward {reward} outside [-1, 1]")
    return (1.0 - w.alpha - w.beta) * confidence - w.alpha * penalty + w.beta * reward


def select_candidates(dist: NextDistribution, k: int) -> list[int]:
    """The k most probable token ids; ties broken toward the lower token id."""
    if k < 1:
        raise ValueError("k must be >= 1")
    ordered = sorted(dist.entries, key=lambda item: (-item[1], item[0]))
    if len(ordered) < k and dist.truncation_mass < 1.0 - MASS_TOL:
        raise ValueError(
            f"k={k} exceeds the {len(ordered)} available entries and the "
            f"distribution covers only mass {dist.truncation_mass}"
        )
    return [token_id for token_id, _ in ordered[:k]]


def _unit_rows(matrix: np.ndarray) -> np.ndarray:
    """Rows scaled to unit norm; zero rows stay zero (similarity 0)."""
    norms = np.linalg.norm(matrix, axis=1, keepdims=True)
    safe = np.where(norms == 0.0, 1.0, norms)
    return matrix / safe


def rank_candidates(
    cands: CandidateSet,
    generated: Sequence[np.ndarray] | np.ndarray,
    source: Sequence[np.ndarray] | np.ndarray | None,
    w: MixWeights,
) -> tuple[int, list[ScoreBreakdown]]:
    """Score every candidate and return (argmax token id, all breakdowns).

    The faithfulness term is only evaluated when beta > 0; score ties go to
    the higher confidence, then the lower token id. All pairwise similarities
    for a step come from two matrix products over row-normalized hiddens.
    """
    use_source = w.beta > 0.0
    if use_source:
        source_arr = np.asarray(source if source is not None else [], dtype=np.float64)
        if source_arr.size == 0:
            raise ValueError("beta > 0 requires a non-empty source span")
    for cand in cands.items:
        if cand.hidden is None:
            raise ValueError(f"candidate {cand.token_id} is missing its hidden state")
    hiddens = _unit_rows(np.asarray([c.hidden for c in cands.items], dtype=np.float64))
    n = len(cands.items)
    generated = np.asarray(generated, dtype=np.float64)
    if generated.size:
        penalties = np.clip((hiddens @ _unit_rows(generated).T).max(axis=1), -1.0, 1.0)
    else:
        penalties = np.zeros(n)
    if use_source:
        rewards = np.clip((hiddens @ _unit_rows(source_arr).T).max(axis=1), -1.0, 1.0)
    else:
        rewards = np.zeros(n)
    breakdowns = []
    for i, cand in enumerate(cands.items):
        total = fecs_score(cand.probability, float(penalties[i]), float(rewards[i]), w)
        breakdowns.append(
            ScoreBreakdown(
                token_id=cand.token_id,
                confidence=cand.probability,
                penalty=float(penalties[i]),
                reward=float(rewards[i]),
                total=total,
            )
        )
    best = max(breakdowns, key=lambda b: (b.total, b.confidence, -b.token_id))
    return best.token_id, breakdowns
