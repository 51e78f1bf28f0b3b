"""Location and on-demand creation of the default toy checkpoint.

The repository ships a trained checkpoint under server/models/toy-copy so the
server and its tests run instantly; if it is missing (fresh clone without the
artifact, or FECS_TOY_MODEL_DIR pointing elsewhere), it is retrained
deterministically from the same seed.
"""

from __future__ import annotations

import os
from pathlib import Path

from .toylm import ToyConfig, TrainConfig, is_toy_checkpoint, save_toy_model, train_toy_model
from .vocab import WordTokenizer

ENV_DIR = "FECS_TOY_MODEL_DIR"

DEFAULT_MODEL_CFG = dict(d_model=128, n_heads=4, n_layers=2, d_ff=512)
DEFAULT_TRAIN_CFG = TrainConfig(steps=4500, batch_size=20, warmup_steps=150)


def default_checkpoint_dir() -> Path:
    override = os.environ.get(ENV_DIR)
    if override:
        return Path(override)
    return Path(__file__).resolve().parents[2] / "models" / "toy-copy"


def ensure_toy_checkpoint(directory: str | os.PathLike | None = None) -> str:
    """Return a directory containing a toy checkpoint, training one if needed."""
    target = Path(directory) if directory else default_checkpoint_dir()
    if is_toy_checkpoint(str(target)):
        return str(target)
    tok = WordTokenizer()
    model = train_toy_model(
        tok,
        model_cfg=ToyConfig(vocab_size=tok.vocab_size, **DEFAULT_MODEL_CFG),
        train_cfg=DEFAULT_TRAIN_CFG,
    )
    save_toy_model(model, tok, str(target))
    return str(target)
