"""Deterministic in-process backend driven by an explicit transition table.

The synthetic backend makes every quantity in a decode hand-computable: the
next-token distribution is a table lookup keyed on the last ``context_order``
tokens, and hidden states are simply the embedding of the token at each
position (context-independent), so similarity values can be verified exactly.

Spec files are JSON documents:

    {
      "name": "tiny",                 # optional
      "vocab_size": 4,
      "hidden_dim": 2,
      "context_order": 1,
      "eos_id": 3,                    # optional, defaults to vocab_size - 1
      "max_context": 1024,            # optional
      "token_strings": ["a", "b", "c", "<eos>"],   # optional
      "transition_table": {"0": [0.5, 0.25, 0.25, 0.0], ...},
      "embedding_table": [[1.0, 0.0], [0.0, 1.0], ...]
    }

Transition-table keys are comma-joined token ids ("" for context_order 0);
contexts without a row fall back to the uniform distribution. The embedding
table is indexed by token id.
"""

from __future__ import annotations

import json
import zlib
from dataclasses import dataclass, field

import numpy as np

from .base import (
    Backend,
    BackendInfo,
    NextDistribution,
    check_candidate_input,
    check_context_input,
)

ROW_SUM_TOL = 1e-9
DEFAULT_MAX_CONTEXT = 1024


@dataclass(frozen=True)
class SyntheticModelSpec:
    vocab_size: int
    hidden_dim: int
    context_order: int
    transition_table: dict[tuple[int, ...], np.ndarray]
    embedding_table: np.ndarray
    eos_id: int = -1
    max_context: int = DEFAULT_MAX_CONTEXT
    name: str = "synthetic"
    token_strings: tuple[str, ...] = field(default=())

    def __post_init__(self) -> None:
        if self.vocab_size < 2:
            raise ValueError("vocab_size must be >= 2")
        if self.hidden_dim < 1:
            raise ValueError("hidden_dim must be >= 1")
        if self.context_order < 0:
            raise ValueError("context_order must be >= 0")
        emb = np.asarray(self.embedding_table, dtype=np.float64)
        if emb.shape != (self.vocab_size, self.hidden_dim):
            raise ValueError(
                f"embedding_table shape {emb.shape} does not cover vocab "
                f"{self.vocab_size} x dim {self.hidden_dim}"
            )
        if not np.all(np.isfinite(emb)):
            raise ValueError("embedding_table contains non-finite values")
        object.__setattr__(self, "embedding_table", emb)
        table: dict[tuple[int, ...], np.ndarray] = {}
        for key, row in self.transition_table.items():
            if len(key) != self.context_order:
                raise ValueError(f"table key {key} has length != context_order {self.context_order}")
            vec = np.asarray(row, dtype=np.float64)
            if vec.shape != (self.vocab_size,):
                raise ValueError(f"probability row for {key} has shape {vec.shape}")
            if np.any(vec < 0):
                raise ValueError(f"probability row for {key} has negative entries")
            if abs(float(vec.sum()) - 1.0) > ROW_SUM_TOL:
                raise ValueError(f"probability row for {key} sums to {vec.sum()}, not 1")
            table[key] = vec
        object.__setattr__(self, "transition_table", table)
        if self.eos_id == -1:
            object.__setattr__(self, "eos_id", self.vocab_size - 1)
        if not 0 <= self.eos_id < self.vocab_size:
            raise ValueError(f"eos_id {self.eos_id} outside vocabulary")
        if not self.token_strings:
            object.__setattr__(
                self, "token_strings", tuple(f"t{i}" for i in range(self.vocab_size))
            )
        if len(self.token_strings) != self.vocab_size:
            raise ValueError("token_strings must cover the whole vocabulary")

    @classmethod
    def from_dict(cls, doc: dict) -> "SyntheticModelSpec":
        table = {}
        for key, row in doc["transition_table"].items():
            ctx = tuple(int(part) for part in key.split(",")) if key else ()
            table[ctx] = np.asarray(row, dtype=np.float64)
        return cls(
            vocab_size=int(doc["vocab_size"]),
            hidden_dim=int(doc["hidden_dim"]),
            context_order=int(doc["context_order"]),
            transition_table=table,
            embedding_table=np.asarray(doc["embedding_table"], dtype=np.float64),
            eos_id=int(doc.get("eos_id", -1)),
            max_context=int(doc.get("max_context", DEFAULT_MAX_CONTEXT)),
            name=str(doc.get("name", "synthetic")),
            token_strings=tuple(doc.get("token_strings", ())),
        )

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "vocab_size": self.vocab_size,
            "hidden_dim": self.hidden_dim,
            "context_order": self.context_order,
            "eos_id": self.eos_id,
            "max_context": self.max_context,
            "token_strings": list(self.token_strings),
            "transition_table": {
                ",".join(str(t) for t in key): row.tolist()
                for key, row in self.transition_table.items()
            },
            "embedding_table": self.embedding_table.tolist(),
        }


def load_spec(path: str) -> SyntheticModelSpec:
    with open(path, encoding="utf-8") as fh:
        return SyntheticModelSpec.from_dict(json.load(fh))


def save_spec(spec: SyntheticModelSpec, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(spec.to_dict(), fh)


class SyntheticBackend(Backend):
    """Backend over a SyntheticModelSpec; whitespace word tokenizer."""

    def __init__(self, spec: SyntheticModelSpec):
        self._spec = spec
        self._info = BackendInfo(
            vocab_size=spec.vocab_size,
            hidden_dim=spec.hidden_dim,
            eos_id=spec.eos_id,
            max_context=spec.max_context,
            name=spec.name,
        )
        self._word_to_id = {w: i for i, w in enumerate(spec.token_strings)}
        # Pre-sorted entry order per row: descending probability, ties to the
        # lower token id, zero-probability tokens excluded.
        self._sorted_rows: dict[tuple[int, ...], list[tuple[int, float]]] = {}
        self._uniform_row = [
            (i, 1.0 / spec.vocab_size) for i in range(spec.vocab_size)
        ]

    @property
    def spec(self) -> SyntheticModelSpec:
        return self._spec

    def backend_info(self) -> BackendInfo:
        return self._info

    def tokenize(self, text: str) -> list[int]:
        ids = []
        for word in text.split():
            tid = self._word_to_id.get(word)
            if tid is None:
                tid = zlib.crc32(word.encode("utf-8")) % self._spec.vocab_size
            ids.append(tid)
        return ids

    def detokenize(self, ids: list[int]) -> str:
        strings = self._spec.token_strings
        for tid in ids:
            if not 0 <= tid < self._spec.vocab_size:
                raise ValueError(f"unknown token id {tid}")
        return " ".join(strings[tid] for tid in ids)

    def _row_entries(self, key: tuple[int, ...]) -> list[tuple[int, float]]:
        row = self._spec.transition_table.get(key)
        if row is None:
            return self._uniform_row
        cached = self._sorted_rows.get(key)
        if cached is None:
            pairs = [(int(i), float(p)) for i, p in enumerate(row) if p > 0.0]
            pairs.sort(key=lambda item: (-item[1], item[0]))
            cached = self._sorted_rows[key] = pairs
        return cached

    def next_distribution(self, tokens: list[int], top_m: int) -> NextDistribution:
        check_context_input(tokens, self._spec.max_context)
        if not 1 <= top_m <= self._spec.vocab_size:
            raise ValueError(f"top_m must be in [1, {self._spec.vocab_size}], got {top_m}")
        order = self._spec.context_order
        key = tuple(tokens[-order:]) if order > 0 else ()
        entries = self._row_entries(key)[:top_m]
        mass = float(sum(p for _, p in entries))
        return NextDistribution(entries=tuple(entries), truncation_mass=mass)

    def context_hiddens(self, tokens: list[int]) -> np.ndarray:
        check_context_input(tokens, self._spec.max_context)
        self._check_ids(tokens)
        return self._spec.embedding_table[np.asarray(tokens, dtype=np.intp)].copy()

    def candidate_hiddens(self, prefix: list[int], candidates: list[int]) -> np.ndarray:
        check_candidate_input(prefix, candidates, self._spec.max_context)
        self._check_ids(prefix)
        self._check_ids(candidates)
        return self._spec.embedding_table[np.asarray(candidates, dtype=np.intp)].copy()

    def _check_ids(self, ids: list[int]) -> None:
        for tid in ids:
            if not 0 <= tid < self._spec.vocab_size:
                raise ValueError(f"unknown token id {tid}")


def build_synthetic(spec: SyntheticModelSpec) -> SyntheticBackend:
    """Construct the deterministic backend described by ``spec``."""
    return SyntheticBackend(spec)


def random_synthetic_spec(
    seed: int,
    vocab_size: int = 8,
    hidden_dim: int = 4,
    context_order: int = 1,
    name: str | None = None,
) -> SyntheticModelSpec:
    """Randomized fixture generator for tests and desk-scale experiments.

    Rows are Dirichlet draws (strictly positive probabilities) over every
    context of length ``context_order``; embeddings are standard normal.
    """
    if context_order > 2:
        raise ValueError("context_order > 2 would enumerate too many rows")
    rng = np.random.default_rng(seed)
    if context_order == 0:
        keys: list[tuple[int, ...]] = [()]
    elif context_order == 1:
        keys = [(i,) for i in range(vocab_size)]
    else:
        keys = [(i, j) for i in range(vocab_size) for j in range(vocab_size)]
    table = {key: rng.dirichlet(np.ones(vocab_size)) for key in keys}
    embeddings = rng.standard_normal((vocab_size, hidden_dim))
    return SyntheticModelSpec(
        vocab_size=vocab_size,
        hidden_dim=hidden_dim,
        context_order=context_order,
        transition_table=table,
        embedding_table=embeddings,
        name=name or f"random-{seed}",
    )
