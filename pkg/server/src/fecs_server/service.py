"""Model services: a uniform inference surface over the toy checkpoint or a
transformers causal LM.

A service exposes exactly what the wire protocol needs: tokenize/detokenize,
the full-softmax next-token distribution, per-position last-layer hidden
states, and batched candidate hidden states. Softmax is taken in float64 so
the served probabilities sum to 1 well within wire tolerances; hidden states
are served as float64 arrays of whatever precision the runtime computed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol

import numpy as np
import torch

from .toylm import TinyGPT, is_toy_checkpoint, load_toy_model
from .vocab import WordTokenizer


@dataclass(frozen=True)
class ServerConfig:
    model: str
    device: str = "cpu"
    top_m_default: int = 512
    max_context: int = 0  # 0 means the model's positional limit
    port: int = 8350
    host: str = "127.0.0.1"
    hidden_norm: str = "post"  # post: after final norm; pre: before it

    def __post_init__(self) -> None:
        if self.hidden_norm not in ("post", "pre"):
            raise ValueError("hidden_norm must be 'post' or 'pre'")
        if not 1 <= self.port <= 65535:
            raise ValueError(f"port {self.port} out of range")
        if self.top_m_default < 1:
            raise ValueError("top_m_default must be >= 1")


class ModelService(Protocol):
    name: str
    vocab_size: int
    hidden_dim: int
    eos_id: int
    max_context: int

    def encode(self, text: str) -> list[int]: ...

    def decode(self, ids: list[int]) -> str: ...

    def next_probs(self, ids: list[int]) -> np.ndarray: ...

    def hiddens(self, ids: list[int]) -> np.ndarray: ...

    def candidate_hiddens(self, ids: list[int], candidates: list[int]) -> np.ndarray: ...


class ToyService:
    """Serves a TinyGPT checkpoint."""

    def __init__(
        self,
        model: TinyGPT,
        tokenizer: WordTokenizer,
        name: str = "toy-gpt",
        max_context: int = 0,
        hidden_norm: str = "post",
    ):
        model.eval()
        self._model = model
        self._tok = tokenizer
        self._post_norm = hidden_norm == "post"
        self.name = name
        self.vocab_size = tokenizer.vocab_size
        self.hidden_dim = model.cfg.d_model
        self.eos_id = tokenizer.eos_id
        self.max_context = min(max_context or model.cfg.block_size, model.cfg.block_size)

    def encode(self, text: str) -> list[int]:
        return self._tok.encode(text)

    def decode(self, ids: list[int]) -> str:
        return self._tok.decode(ids)

    @torch.no_grad()
    def _forward(self, batch: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        logits, normed, raw = self._model(batch)
        return logits, (normed if self._post_norm else raw)

    def next_probs(self, ids: list[int]) -> np.ndarray:
        batch = torch.tensor([ids], dtype=torch.long)
        logits, _ = self._forward(batch)
        return torch.softmax(logits[0, -1].double(), dim=-1).numpy()

    def hiddens(self, ids: list[int]) -> np.ndarray:
        batch = torch.tensor([ids], dtype=torch.long)
        _, hidden = self._forward(batch)
        return hidden[0].double().numpy()

    def candidate_hiddens(self, ids: list[int], candidates: list[int]) -> np.ndarray:
        rows = [ids + [cand] for cand in candidates]
        batch = torch.tensor(rows, dtype=torch.long)
        _, hidden = self._forward(batch)
        return hidden[:, -1, :].double().numpy()


class TransformersService:
    """Serves any causal LM following the transformers conventions.

    ``model`` must map input_ids to logits with ``last_hidden_state`` exposed
    by its base model; ``tokenizer`` needs encode/decode and an eos token id.
    """

    def __init__(
        self,
        model,
        tokenizer,
        name: str,
        max_context: int = 0,
        device: str = "cpu",
    ):
        model.eval()
        self._model = model.to(device)
        self._tok = tokenizer
        self._device = device
        config = model.config
        self.name = name
        self.vocab_size = int(config.vocab_size)
        self.hidden_dim = int(getattr(config, "hidden_size", None) or config.n_embd)
        self.eos_id = int(tokenizer.eos_token_id)
        positional = int(
            getattr(config, "max_position_embeddings", None) or config.n_positions
        )
        self.max_context = min(max_context or positional, positional)

    def encode(self, text: str) -> list[int]:
        return list(self._tok.encode(text))

    def decode(self, ids: list[int]) -> str:
        return str(self._tok.decode(ids))

    @torch.no_grad()
    def _forward(self, batch: torch.Tensor):
        out = self._model(input_ids=batch.to(self._device), output_hidden_states=True)
        # Final entry of hidden_states is the last layer as the model exposes
        # it (after any final normalization).
        return out.logits, out.hidden_states[-1]

    def next_probs(self, ids: list[int]) -> np.ndarray:
        logits, _ = self._forward(torch.tensor([ids], dtype=torch.long))
        return torch.softmax(logits[0, -1].double(), dim=-1).cpu().numpy()

    def hiddens(self, ids: list[int]) -> np.ndarray:
        _, hidden = self._forward(torch.tensor([ids], dtype=torch.long))
        return hidden[0].double().cpu().numpy()

    def candidate_hiddens(self, ids: list[int], candidates: list[int]) -> np.ndarray:
        rows = [ids + [cand] for cand in candidates]
        _, hidden = self._forward(torch.tensor(rows, dtype=torch.long))
        return hidden[:, -1, :].double().cpu().numpy()


def load_service(cfg: ServerConfig) -> ModelService:
    """Resolve cfg.model: a toy-gpt checkpoint directory, or a transformers
    model id/path (requires the model files to be available locally)."""
    if is_toy_checkpoint(cfg.model):
        model, tok = load_toy_model(cfg.model)
        return ToyService(
            model,
            tok,
            name=f"toy-gpt:{cfg.model}",
            max_context=cfg.max_context,
            hidden_norm=cfg.hidden_norm,
        )
    from transformers import AutoModelForCausalLM, AutoTokenizer

    model = AutoModelForCausalLM.from_pretrained(cfg.model)
    tokenizer = AutoTokenizer.from_pretrained(cfg.model)
    return TransformersService(
        model, tokenizer, name=cfg.model, max_context=cfg.max_context, device=cfg.device
    )
