"""A tiny decoder-only transformer trained from scratch on a synthetic
copy-summarization corpus, giving the engine genuine causal-LM geometry
(attention-mixed hidden states, soft full-softmax distributions) at desk
scale and fully offline.

Each training document is one to three "Article: ... / Summary: ..." pairs
where the summary is a contiguous fragment of its article, so the model
learns induction-style copying from the source span; fragment starts and
lengths are random, which keeps the distributions soft.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from .vocab import WordTokenizer


@dataclass
class ToyConfig:
    vocab_size: int
    d_model: int = 96
    n_heads: int = 4
    n_layers: int = 2
    d_ff: int = 384
    block_size: int = 256
    dropout: float = 0.0


@dataclass
class TrainConfig:
    seed: int = 1234
    batch_size: int = 16
    steps: int = 1500
    lr: float = 1e-3
    warmup_steps: int = 100
    min_lr: float = 1e-4
    weight_decay: float = 0.01
    full_copy_fraction: float = 0.3  # summaries that copy the whole article


class Block(nn.Module):
    def __init__(self, cfg: ToyConfig):
        super().__init__()
        self.ln1 = nn.LayerNorm(cfg.d_model)
        self.attn = nn.MultiheadAttention(
            cfg.d_model, cfg.n_heads, dropout=cfg.dropout, batch_first=True
        )
        self.ln2 = nn.LayerNorm(cfg.d_model)
        self.mlp = nn.Sequential(
            nn.Linear(cfg.d_model, cfg.d_ff),
            nn.GELU(),
            nn.Linear(cfg.d_ff, cfg.d_model),
        )

    def forward(self, x: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        normed = self.ln1(x)
        attn_out, _ = self.attn(normed, normed, normed, attn_mask=mask, need_weights=False)
        x = x + attn_out
        return x + self.mlp(self.ln2(x))


class TinyGPT(nn.Module):
    """Pre-norm causal transformer with learned positions and a tied head."""

    def __init__(self, cfg: ToyConfig):
        super().__init__()
        self.cfg = cfg
        self.tok_emb = nn.Embedding(cfg.vocab_size, cfg.d_model)
        self.pos_emb = nn.Embedding(cfg.block_size, cfg.d_model)
        self.blocks = nn.ModuleList(Block(cfg) for _ in range(cfg.n_layers))
        self.ln_f = nn.LayerNorm(cfg.d_model)
        self.head = nn.Linear(cfg.d_model, cfg.vocab_size, bias=False)
        self.apply(self._init_weights)
        self.head.weight = self.tok_emb.weight

    @staticmethod
    def _init_weights(module: nn.Module) -> None:
        if isinstance(module, (nn.Linear, nn.Embedding)):
            nn.init.normal_(module.weight, mean=0.0, std=0.02)
            if isinstance(module, nn.Linear) and module.bias is not None:
                nn.init.zeros_(module.bias)

    def forward(self, idx: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
        """Returns (logits, normed hiddens, pre-norm hiddens), all (B, T, ...)."""
        batch, length = idx.shape
        if length > self.cfg.block_size:
            raise ValueError(f"sequence of {length} exceeds block_size {self.cfg.block_size}")
        positions = torch.arange(length, device=idx.device)
        x = self.tok_emb(idx) + self.pos_emb(positions)[None, :, :]
        mask = torch.triu(
            torch.full((length, length), float("-inf"), device=idx.device), diagonal=1
        )
        for block in self.blocks:
            x = block(x, mask)
        normed = self.ln_f(x)
        return self.head(normed), normed, x


def make_document(
    rng: np.random.Generator, tok: WordTokenizer, full_copy_fraction: float = 0.3
) -> list[int]:
    """One training document: 2 or 3 article/summary pairs as token ids.

    The pair count mirrors few-shot prompting (two exemplars plus the
    instance); article words are drawn without replacement, so each summary
    token has a unique article antecedent for the copy relation.
    """
    article_id = tok.encode("Article:")[0]
    summary_id = tok.encode("Summary:")[0]
    content = tok.content_ids()
    doc: list[int] = []
    for _ in range(int(rng.integers(2, 4))):
        n_words = int(rng.integers(6, 13))
        words = [int(w) for w in rng.choice(content, size=n_words, replace=False)]
        if rng.random() < full_copy_fraction:
            fragment = words
        else:
            start = int(rng.integers(0, n_words - 4))
            length = int(rng.integers(4, n_words - start + 1))
            fragment = words[start : start + length]
        doc.extend([article_id, *words, tok.newline_id])
        doc.extend([summary_id, *fragment, tok.newline_id])
    doc.append(tok.eos_id)
    return doc


IGNORE = -100


def _document_batch(
    rng: np.random.Generator, tok: WordTokenizer, train_cfg: TrainConfig, block_size: int
) -> tuple[torch.Tensor, torch.Tensor]:
    """Whole documents padded to a common length; padding is masked out of the
    loss so a summary never trains without its article in view."""
    docs = [
        make_document(rng, tok, train_cfg.full_copy_fraction)
        for _ in range(train_cfg.batch_size)
    ]
    docs = [doc[: block_size + 1] for doc in docs]
    width = max(len(doc) for doc in docs)
    inputs = torch.full((len(docs), width - 1), tok.eos_id, dtype=torch.long)
    targets = torch.full((len(docs), width - 1), IGNORE, dtype=torch.long)
    for i, doc in enumerate(docs):
        row = torch.tensor(doc, dtype=torch.long)
        inputs[i, : len(doc) - 1] = row[:-1]
        targets[i, : len(doc) - 1] = row[1:]
    return inputs, targets


def train_toy_model(
    tok: WordTokenizer,
    model_cfg: ToyConfig | None = None,
    train_cfg: TrainConfig | None = None,
    log_every: int = 200,
) -> TinyGPT:
    model_cfg = model_cfg or ToyConfig(vocab_size=tok.vocab_size)
    train_cfg = train_cfg or TrainConfig()
    torch.manual_seed(train_cfg.seed)
    model = TinyGPT(model_cfg)
    rng = np.random.default_rng(train_cfg.seed + 1)
    optimizer = torch.optim.AdamW(
        model.parameters(), lr=train_cfg.lr, weight_decay=train_cfg.weight_decay
    )

    def lr_at(step: int) -> float:
        if step < train_cfg.warmup_steps:
            return train_cfg.lr * (step + 1) / train_cfg.warmup_steps
        progress = (step - train_cfg.warmup_steps) / max(
            1, train_cfg.steps - train_cfg.warmup_steps
        )
        return train_cfg.min_lr + 0.5 * (train_cfg.lr - train_cfg.min_lr) * (
            1 + math.cos(math.pi * progress)
        )

    model.train()
    for step in range(train_cfg.steps):
        for group in optimizer.param_groups:
            group["lr"] = lr_at(step)
        inputs, targets = _document_batch(rng, tok, train_cfg, model_cfg.block_size)
        logits, _, _ = model(inputs)
        loss = F.cross_entropy(
            logits.reshape(-1, model_cfg.vocab_size),
            targets.reshape(-1),
            ignore_index=IGNORE,
        )
        optimizer.zero_grad()
        loss.backward()
        optimizer.step()
        if log_every and (step % log_every == 0 or step == train_cfg.steps - 1):
            print(f"step {step:5d}  lr {lr_at(step):.2e}  loss {loss.item():.4f}")
    model.eval()
    return model


def save_toy_model(model: TinyGPT, tok: WordTokenizer, out_dir: str) -> None:
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "config.json"), "w", encoding="utf-8") as fh:
        json.dump({"kind": "toy-gpt", "model": asdict(model.cfg)}, fh, indent=2)
    with open(os.path.join(out_dir, "vocab.json"), "w", encoding="utf-8") as fh:
        json.dump(tok.vocab, fh)
    torch.save(model.state_dict(), os.path.join(out_dir, "weights.pt"))


def load_toy_model(model_dir: str) -> tuple[TinyGPT, WordTokenizer]:
    with open(os.path.join(model_dir, "config.json"), encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("kind") != "toy-gpt":
        raise ValueError(f"{model_dir} does not contain a toy-gpt checkpoint")
    with open(os.path.join(model_dir, "vocab.json"), encoding="utf-8") as fh:
        tok = WordTokenizer(json.load(fh))
    model = TinyGPT(ToyConfig(**doc["model"]))
    state = torch.load(os.path.join(model_dir, "weights.pt"), map_location="cpu")
    model.load_state_dict(state)
    model.eval()
    return model, tok


def is_toy_checkpoint(path: str) -> bool:
    config = os.path.join(path, "config.json")
    if not os.path.isfile(config):
        return False
    try:
        with open(config, encoding="utf-8") as fh:
            return json.load(fh).get("kind") == "toy-gpt"
    except (OSError, json.JSONDecodeError):
        return False
