"""Fidelity-enriched contrastive search and baseline decoding strategies over
pluggable language-model backends, with repetition/diversity metrics and an
experiment harness."""

from .backend import (
    Backend,
    BackendError,
    BackendInfo,
    NextDistribution,
    build_synthetic,
    connect_remote,
    random_synthetic_spec,
)
from .context import SegmentedSequence, TaskTemplate, render_prompt, segment
from .decoding import (
    DecodeConfig,
    DecodeTrace,
    decode,
    decode_beam,
    decode_contrastive,
    decode_fecs,
    decode_greedy,
    decode_nucleus,
)
from .metrics import DiversityReport, diversity, diversity_of_text, rep_n
from .scoring import (
    Candidate,
    CandidateSet,
    MixWeights,
    ScoreBreakdown,
    cosine_similarity,
    degeneration_penalty,
    faithfulness_reward,
    fecs_score,
    rank_candidates,
    select_candidates,
)

__version__ = "0.1.0"

__all__ = [
    "Backend",
    "BackendError",
    "BackendInfo",
    "Candidate",
    "CandidateSet",
    "DecodeConfig",
    "DecodeTrace",
    "DiversityReport",
    "MixWeights",
    "NextDistribution",
    "ScoreBreakdown",
    "SegmentedSequence",
    "TaskTemplate",
    "build_synthetic",
    "connect_remote",
    "cosine_similarity",
    "decode",
    "decode_beam",
    "decode_contrastive",
    "decode_fecs",
    "decode_greedy",
    "decode_nucleus",
    "degeneration_penalty",
    "diversity",
    "diversity_of_text",
    "faithfulness_reward",
    "fecs_score",
    "random_synthetic_spec",
    "rank_candidates",
    "render_prompt",
    "rep_n",
    "segment",
    "select_candidates",
]
