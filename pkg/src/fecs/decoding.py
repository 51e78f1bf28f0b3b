"""Decoding loops: fidelity-enriched contrastive search plus the contrastive,
greedy, beam, and nucleus baselines, with stopping rules and per-step traces.

One decode session is strictly sequential (step t+1 depends on step t), holds
no shared mutable state, and is deterministic: the re-ranking strategies and
beam search always produce the same tokens; nucleus sampling is fully
determined by its seed (PCG64 with inverse-CDF sampling over the renormalized
nucleus).
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .backend.base import Backend, ContextOverflowError
from .context import SegmentedSequence
from .scoring import (
    Candidate,
    CandidateSet,
    MixWeights,
    ScoreBreakdown,
    rank_candidates,
    select_candidates,
)

STRATEGIES = ("greedy", "beam", "nucleus", "contrastive", "fecs")

# Default truncation requested from the backend when a strategy needs more
# than its top-k (nucleus); bounds wire payloads, grown on demand.
DEFAULT_TOP_M = 512

MASS_EPS = 1e-9
COVERAGE_EPS = 1e-6


class ConfigError(ValueError):
    """Raised for an invalid decode configuration."""


@dataclass(frozen=True)
class DecodeConfig:
    strategy: str
    k: int = 4
    weights: MixWeights = MixWeights(0.0, 0.0)
    nucleus_p: float = 0.95
    beam_width: int = 4
    max_new_tokens: int = 128
    stop_on_eos: bool = True
    stop_on_newline: bool = False
    seed: int = 0

    def validate(self) -> list[str]:
        """All invariant violations, as human-readable messages."""
        errors = []
        if self.strategy not in STRATEGIES:
            errors.append(f"unknown strategy {self.strategy!r}; expected one of {STRATEGIES}")
        if self.k < 1:
            errors.append(f"k must be >= 1, got {self.k}")
        if not 0.0 < self.nucleus_p <= 1.0:
            errors.append(f"nucleus_p must be in (0, 1], got {self.nucleus_p}")
        if self.beam_width < 1:
            errors.append(f"beam_width must be >= 1, got {self.beam_width}")
        if self.max_new_tokens < 1:
            errors.append(f"max_new_tokens must be >= 1, got {self.max_new_tokens}")
        if self.weights.alpha + self.weights.beta > 1:
            errors.append("alpha+beta exceeds 1")
        if self.strategy == "fecs" and self.weights.beta == 0:
            errors.append("strategy fecs requires beta > 0; use strategy contrastive for beta == 0")
        if self.strategy == "contrastive" and self.weights.beta != 0:
            errors.append("strategy contrastive requires beta == 0; use strategy fecs for beta > 0")
        return errors

    def check_valid(self) -> None:
        errors = self.validate()
        if errors:
            raise ConfigError("; ".join(errors))


@dataclass(frozen=True)
class TraceStep:
    position: int
    candidates: CandidateSet
    breakdowns: tuple[ScoreBreakdown, ...]
    chosen: int
    elapsed: float


@dataclass
class DecodeTrace:
    steps: list[TraceStep] = field(default_factory=list)
    truncated: bool = False

    def record(self, step: TraceStep) -> None:
        if self.steps and step.position <= self.steps[-1].position:
            raise ValueError("trace positions must be strictly increasing")
        if step.chosen not in [c.token_id for c in step.candidates.items]:
            raise ValueError(f"chosen token {step.chosen} not in the step's candidate set")
        self.steps.append(step)


def decode(
    seq: SegmentedSequence, cfg: DecodeConfig, backend: Backend
) -> tuple[list[int], DecodeTrace]:
    """Dispatch on cfg.strategy."""
    cfg.check_valid()
    fns = {
        "fecs": decode_fecs,
        "contrastive": decode_contrastive,
        "greedy": decode_greedy,
        "beam": decode_beam,
        "nucleus": decode_nucleus,
    }
    return fns[cfg.strategy](seq, cfg, backend)


def decode_fecs(
    seq: SegmentedSequence, cfg: DecodeConfig, backend: Backend
) -> tuple[list[int], DecodeTrace]:
    if cfg.strategy != "fecs":
        raise ConfigError(f"decode_fecs got strategy {cfg.strategy!r}")
    cfg.check_valid()
    if not seq.has_source:
        raise ConfigError("fecs decoding requires a non-empty source span")
    return _rescored_decode(seq, cfg, backend, cfg.weights)


def decode_contrastive(
    seq: SegmentedSequence, cfg: DecodeConfig, backend: Backend
) -> tuple[list[int], DecodeTrace]:
    if cfg.strategy != "contrastive":
        raise ConfigError(f"decode_contrastive got strategy {cfg.strategy!r}")
    cfg.check_valid()
    return _rescored_decode(seq, cfg, backend, MixWeights(cfg.weights.alpha, 0.0))


def _rescored_decode(
    seq: SegmentedSequence,
    cfg: DecodeConfig,
    backend: Backend,
    weights: MixWeights,
) -> tuple[list[int], DecodeTrace]:
    """Shared top-k re-ranking loop.

    Source hiddens are computed once up front; each generated token's hidden
    is the one produced by its own candidate evaluation, which is exact for
    causal backends (appending tokens never changes prefix hiddens).
    """
    info = backend.backend_info()
    cur = list(seq.tokens)
    source_h: np.ndarray | None = None
    generated_h: list[np.ndarray] = []
    if weights.beta > 0 or (weights.alpha > 0 and len(cur) > seq.c):
        ctx = backend.context_hiddens(cur)
        if weights.beta > 0:
            source_h = ctx[seq.s : seq.c]
        generated_h = [ctx[i] for i in range(seq.c, len(cur))]
    trace = DecodeTrace()
    out: list[int] = []
    stopper = _Stopper(cfg, backend, info.eos_id)
    for position in range(cfg.max_new_tokens):
        if len(cur) + 1 > info.max_context:
            trace.truncated = True
            break
        t0 = time.perf_counter()
        try:
            dist = backend.next_distribution(cur, top_m=min(cfg.k, info.vocab_size))
            ids = select_candidates(dist, min(cfg.k, info.vocab_size))
            cand_h = backend.candidate_hiddens(cur, ids)
        except ContextOverflowError:
            trace.truncated = True
            break
        cands = CandidateSet(
            items=tuple(
                Candidate(tid, dist.probability_of(tid), cand_h[i]) for i, tid in enumerate(ids)
            ),
            k=cfg.k,
        )
        gen_arr = np.asarray(generated_h) if generated_h else np.empty((0, info.hidden_dim))
        chosen, breakdowns = rank_candidates(cands, gen_arr, source_h, weights)
        elapsed = time.perf_counter() - t0
        trace.record(TraceStep(position, cands, tuple(breakdowns), chosen, elapsed))
        cur.append(chosen)
        generated_h.append(cand_h[ids.index(chosen)])
        out.append(chosen)
        if stopper.should_stop(chosen):
            break
    return stopper.strip(out), trace


def decode_greedy(
    seq: SegmentedSequence, cfg: DecodeConfig, backend: Backend
) -> tuple[list[int], DecodeTrace]:
    """Argmax of the next-token distribution each step; ties to the lower id."""
    if cfg.strategy != "greedy":
        raise ConfigError(f"decode_greedy got strategy {cfg.strategy!r}")
    cfg.check_valid()
    info = backend.backend_info()
    cur = list(seq.tokens)
    trace = DecodeTrace()
    out: list[int] = []
    stopper = _Stopper(cfg, backend, info.eos_id)
    for position in range(cfg.max_new_tokens):
        if len(cur) + 1 > info.max_context:
            trace.truncated = True
            break
        t0 = time.perf_counter()
        try:
            dist = backend.next_distribution(cur, top_m=1)
        except ContextOverflowError:
            trace.truncated = True
            break
        chosen, prob = dist.entries[0]
        elapsed = time.perf_counter() - t0
        cands = CandidateSet(items=(Candidate(chosen, prob, None),), k=1)
        # Greedy is the alpha = beta = 0 point of the shared objective, so the
        # recorded total is the bare confidence.
        breakdown = ScoreBreakdown(chosen, prob, 0.0, 0.0, prob)
        trace.record(TraceStep(position, cands, (breakdown,), chosen, elapsed))
        cur.append(chosen)
        out.append(chosen)
        if stopper.should_stop(chosen):
            break
    return stopper.strip(out), trace


@dataclass
class _Hypothesis:
    tokens: list[int]
    logprob: float
    finished: bool
    steps: list[TraceStep]
    truncated: bool = False


def decode_beam(
    seq: SegmentedSequence, cfg: DecodeConfig, backend: Backend
) -> tuple[list[int], DecodeTrace]:
    """Beam search over summed log-probabilities, no length normalization.

    Returns the best finished hypothesis, falling back to the best live one at
    max_new_tokens; beam_width=1 is identical to greedy.
    """
    if cfg.strategy != "beam":
        raise ConfigError(f"decode_beam got strategy {cfg.strategy!r}")
    cfg.check_valid()
    info = backend.backend_info()
    width = cfg.beam_width
    stopper = _Stopper(cfg, backend, info.eos_id)
    init = len(seq.tokens)
    beams = [_Hypothesis(tokens=list(seq.tokens), logprob=0.0, finished=False, steps=[])]
    for position in range(cfg.max_new_tokens):
        scored: list[_Hypothesis] = [b for b in beams if b.finished]
        expanded = False
        for hyp in beams:
            if hyp.finished:
                continue
            if len(hyp.tokens) + 1 > info.max_context:
                hyp.finished = True
                hyp.truncated = True
                scored.append(hyp)
                continue
            t0 = time.perf_counter()
            try:
                dist = backend.next_distribution(hyp.tokens, top_m=min(width, info.vocab_size))
            except ContextOverflowError:
                hyp.finished = True
                hyp.truncated = True
                scored.append(hyp)
                continue
            elapsed = time.perf_counter() - t0
            expanded = True
            cands = CandidateSet(
                items=tuple(Candidate(tid, p, None) for tid, p in dist.entries),
                k=min(width, info.vocab_size),
            )
            for tid, prob in dist.entries:
                step = TraceStep(position, cands, (), tid, elapsed)
                scored.append(
                    _Hypothesis(
                        tokens=hyp.tokens + [tid],
                        logprob=hyp.logprob + math.log(prob),
                        finished=stopper.is_stop_token(tid),
                        steps=hyp.steps + [step],
                    )
                )
        if not expanded:
            break
        scored.sort(key=lambda h: (-h.logprob, tuple(h.tokens[init:])))
        beams = scored[:width]
        if all(h.finished for h in beams):
            break
    finished = [h for h in beams if h.finished]
    best = min(finished or beams, key=lambda h: (-h.logprob, tuple(h.tokens[init:])))
    trace = DecodeTrace(truncated=best.truncated)
    for step in best.steps:
        trace.record(step)
    return stopper.strip(best.tokens[init:]), trace


def decode_nucleus(
    seq: SegmentedSequence, cfg: DecodeConfig, backend: Backend
) -> tuple[list[int], DecodeTrace]:
    """Sample from the smallest probability-sorted prefix with mass >= p,
    renormalized; fully determined by cfg.seed."""
    if cfg.strategy != "nucleus":
        raise ConfigError(f"decode_nucleus got strategy {cfg.strategy!r}")
    cfg.check_valid()
    info = backend.backend_info()
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    cur = list(seq.tokens)
    trace = DecodeTrace()
    out: list[int] = []
    stopper = _Stopper(cfg, backend, info.eos_id)
    for position in range(cfg.max_new_tokens):
        if len(cur) + 1 > info.max_context:
            trace.truncated = True
            break
        t0 = time.perf_counter()
        try:
            entries, mass = _covering_entries(backend, cur, cfg.nucleus_p, info.vocab_size)
        except ContextOverflowError:
            trace.truncated = True
            break
        nucleus = _nucleus_prefix(entries, cfg.nucleus_p)
        probs = np.array([p for _, p in nucleus])
        probs /= probs.sum()
        u = rng.random()
        idx = int(np.searchsorted(np.cumsum(probs), u, side="right"))
        idx = min(idx, len(nucleus) - 1)
        chosen = nucleus[idx][0]
        elapsed = time.perf_counter() - t0
        cands = CandidateSet(
            items=tuple(Candidate(tid, p, None) for tid, p in nucleus), k=len(nucleus)
        )
        trace.record(TraceStep(position, cands, (), chosen, elapsed))
        cur.append(chosen)
        out.append(chosen)
        if stopper.should_stop(chosen):
            break
    return stopper.strip(out), trace


def _covering_entries(
    backend: Backend, tokens: list[int], p: float, vocab_size: int
) -> tuple[tuple[tuple[int, float], ...], float]:
    """Fetch distribution entries until their mass covers p, growing top_m."""
    top_m = min(DEFAULT_TOP_M, vocab_size)
    while True:
        dist = backend.next_distribution(tokens, top_m=top_m)
        if dist.truncation_mass >= p - MASS_EPS or top_m >= vocab_size:
            if dist.truncation_mass < p - COVERAGE_EPS and top_m >= vocab_size:
                raise RuntimeError(
                    f"full vocabulary covers mass {dist.truncation_mass} < p={p}"
                )
            return dist.entries, dist.truncation_mass
        top_m = min(top_m * 2, vocab_size)


def _nucleus_prefix(
    entries: tuple[tuple[int, float], ...], p: float
) -> list[tuple[int, float]]:
    cum = 0.0
    nucleus = []
    for tid, prob in entries:
        nucleus.append((tid, prob))
        cum += prob
        if cum >= p - MASS_EPS:
            break
    return nucleus


class _Stopper:
    """Stopping rules: EOS, newline-bearing tokens, and output cleanup."""

    def __init__(self, cfg: DecodeConfig, backend: Backend, eos_id: int):
        self._cfg = cfg
        self._backend = backend
        self._eos_id = eos_id
        self._newline_cache: dict[int, bool] = {}
        self._stopped_on_eos = False

    def is_eos(self, token_id: int) -> bool:
        return self._cfg.stop_on_eos and token_id == self._eos_id

    def _has_newline(self, token_id: int) -> bool:
        cached = self._newline_cache.get(token_id)
        if cached is None:
            cached = self._newline_cache[token_id] = "\n" in self._backend.detokenize([token_id])
        return cached

    def is_stop_token(self, token_id: int) -> bool:
        return self.is_eos(token_id) or (
            self._cfg.stop_on_newline and self._has_newline(token_id)
        )

    def should_stop(self, token_id: int) -> bool:
        if self.is_eos(token_id):
            self._stopped_on_eos = True
            return True
        return self._cfg.stop_on_newline and self._has_newline(token_id)

    def strip(self, tokens: list[int]) -> list[int]:
        """Drop a terminating EOS from the emitted sequence; newline stays."""
        if self._cfg.stop_on_eos and tokens and tokens[-1] == self._eos_id:
            return tokens[:-1]
        return tokens
