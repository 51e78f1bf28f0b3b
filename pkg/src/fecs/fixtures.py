"""Desk-scale fixture generators shared by the test suite and the experiment
scripts: randomized synthetic model specs plus matching word datasets."""

from __future__ import annotations

import json

import numpy as np

from .backend.synthetic import SyntheticModelSpec, random_synthetic_spec
from .records import DatasetInstance


def make_word_dataset(
    spec: SyntheticModelSpec,
    n_instances: int,
    seed: int,
    task: str = "summarization",
    min_words: int = 8,
    max_words: int = 20,
) -> list[DatasetInstance]:
    """Instances whose sources are random words from the spec's vocabulary,
    so the synthetic tokenizer round-trips them exactly."""
    rng = np.random.default_rng(seed)
    words = list(spec.token_strings)
    instances = []
    for i in range(n_instances):
        length = int(rng.integers(min_words, max_words + 1))
        source = " ".join(rng.choice(words, size=length))
        history = ("User: tell me about it",) if task == "dialogue" else None
        instances.append(
            DatasetInstance(id=f"inst-{i:04d}", source=source, task=task, history=history)
        )
    return instances


def write_dataset(instances: list[DatasetInstance], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for inst in instances:
            fh.write(json.dumps(inst.to_dict()) + "\n")


def make_fixture_pair(
    seed: int,
    vocab_size: int = 12,
    hidden_dim: int = 6,
    context_order: int = 1,
    n_instances: int = 4,
) -> tuple[SyntheticModelSpec, list[DatasetInstance]]:
    spec = random_synthetic_spec(
        seed, vocab_size=vocab_size, hidden_dim=hidden_dim, context_order=context_order
    )
    return spec, make_word_dataset(spec, n_instances, seed=seed + 1)
