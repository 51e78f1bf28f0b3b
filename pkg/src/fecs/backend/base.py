"""Backend abstraction: anything that can tokenize, report next-token
probabilities from the full softmax, and expose per-token last-layer hidden
states.

Hidden states are numpy float64 arrays; a single hidden vector has shape
``(hidden_dim,)`` and a stack of them shape ``(n, hidden_dim)``.
"""

from __future__ import annotations

import abc
import math
from dataclasses import dataclass

import numpy as np

MASS_TOL = 1e-9


class BackendError(RuntimeError):
    """Raised when a backend operation fails."""


class BackendConnectionError(BackendError):
    """Remote backend is unreachable."""


class ContextOverflowError(BackendError):
    """Input exceeds the backend's maximum context length."""


class ProtocolError(BackendError):
    """Remote response is malformed or uses an unsupported protocol version."""


@dataclass(frozen=True)
class BackendInfo:
    vocab_size: int
    hidden_dim: int
    eos_id: int
    max_context: int
    name: str

    def __post_init__(self) -> None:
        if self.vocab_size < 2:
            raise ValueError(f"vocab_size must be >= 2, got {self.vocab_size}")
        if self.hidden_dim < 1:
            raise ValueError(f"hidden_dim must be >= 1, got {self.hidden_dim}")
        if not 0 <= self.eos_id < self.vocab_size:
            raise ValueError(f"eos_id {self.eos_id} outside vocabulary of size {self.vocab_size}")
        if self.max_context < 1:
            raise ValueError(f"max_context must be >= 1, got {self.max_context}")


@dataclass(frozen=True)
class NextDistribution:
    """Top slice of a next-token distribution.

    ``entries`` are (token_id, probability) pairs sorted by descending
    probability; probabilities come from the full softmax, never renormalized
    over the truncation. ``truncation_mass`` is the total probability the
    entries cover.
    """

    entries: tuple[tuple[int, float], ...]
    truncation_mass: float

    def __post_init__(self) -> None:
        if not self.entries:
            raise ValueError("distribution must contain at least one entry")
        prev = math.inf
        seen: set[int] = set()
        for token_id, prob in self.entries:
            if not 0.0 < prob <= 1.0:
                raise ValueError(f"probability {prob} for token {token_id} outside (0, 1]")
            if prob > prev:
                raise ValueError("entries must be sorted by non-increasing probability")
            if token_id in seen:
                raise ValueError(f"duplicate token id {token_id}")
            seen.add(token_id)
            prev = prob
        total = math.fsum(p for _, p in self.entries)
        if abs(total - self.truncation_mass) > MASS_TOL:
            raise ValueError(
                f"truncation_mass {self.truncation_mass} does not match entry sum {total}"
            )

    def probability_of(self, token_id: int) -> float:
        for tid, prob in self.entries:
            if tid == token_id:
                return prob
        raise KeyError(token_id)


class Backend(abc.ABC):
    """Abstract model backend.

    Instances are immutable after construction; every operation is a pure
    function of its inputs, safe to call concurrently from independent decode
    sessions.
    """

    @abc.abstractmethod
    def backend_info(self) -> BackendInfo:
        """Static description of the backend; stable across calls."""

    @abc.abstractmethod
    def tokenize(self, text: str) -> list[int]:
        """Map text to token ids."""

    @abc.abstractmethod
    def detokenize(self, ids: list[int]) -> str:
        """Map token ids back to text."""

    @abc.abstractmethod
    def next_distribution(self, tokens: list[int], top_m: int) -> NextDistribution:
        """Top ``top_m`` next-token probabilities from the full softmax."""

    @abc.abstractmethod
    def context_hiddens(self, tokens: list[int]) -> np.ndarray:
        """Last-layer hidden state per input position, shape (len(tokens), hidden_dim)."""

    @abc.abstractmethod
    def candidate_hiddens(self, prefix: list[int], candidates: list[int]) -> np.ndarray:
        """Hidden state at the final position of prefix+[v] for each candidate v.

        Returns shape (len(candidates), hidden_dim), one logical batched
        evaluation; row order matches ``candidates``.
        """


def check_context_input(tokens: list[int], max_context: int) -> None:
    if len(tokens) == 0:
        raise ValueError("token sequence must be non-empty")
    if len(tokens) > max_context:
        raise ContextOverflowError(
            f"context of {len(tokens)} tokens exceeds max_context {max_context}"
        )


def check_candidate_input(prefix: list[int], candidates: list[int], max_context: int) -> None:
    if len(prefix) == 0:
        raise ValueError("prefix must be non-empty")
    if len(candidates) == 0:
        raise ValueError("candidates must be non-empty")
    if len(set(candidates)) != len(candidates):
        raise ValueError("candidate token ids must be unique")
    if len(prefix) + 1 > max_context:
        raise ContextOverflowError(
            f"prefix of {len(prefix)} tokens leaves no room within max_context {max_context}"
        )
