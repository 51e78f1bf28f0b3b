import numpy as np
import pytest

from fecs.backend.synthetic import SyntheticModelSpec, build_synthetic


def one_hot_spec(row, context_order=0, eos_id=None, max_context=1024, extra_rows=None):
    """Spec with one-hot embeddings and a single (or few) transition rows, so
    every similarity is 0 or 1 and scores are hand-computable."""
    vocab = len(row)
    table = {(): np.asarray(row, dtype=np.float64)} if context_order == 0 else dict(extra_rows)
    return SyntheticModelSpec(
        vocab_size=vocab,
        hidden_dim=vocab,
        context_order=context_order,
        transition_table=table,
        embedding_table=np.eye(vocab),
        eos_id=vocab - 1 if eos_id is None else eos_id,
        max_context=max_context,
    )


@pytest.fixture
def worked_backend():
    """The hand-worked fixture: distribution [0.4, 0.1, 0.35, 0.15] over four
    tokens, one-hot embeddings, context-independent."""
    return build_synthetic(one_hot_spec([0.4, 0.1, 0.35, 0.15]))
