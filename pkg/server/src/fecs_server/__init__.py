"""HTTP model server for the decoding engine: serves tokenization, full-
softmax next-token distributions, and last-layer hidden states from a real
(small) causal language model."""

from .app import create_app
from .selftest import run_selftest
from .service import ModelService, ServerConfig, ToyService, TransformersService, load_service
from .toylm import TinyGPT, ToyConfig, TrainConfig, load_toy_model, save_toy_model, train_toy_model
from .vocab import WordTokenizer

__version__ = "0.1.0"

__all__ = [
    "ModelService",
    "ServerConfig",
    "TinyGPT",
    "ToyConfig",
    "ToyService",
    "TrainConfig",
    "TransformersService",
    "WordTokenizer",
    "create_app",
    "load_service",
    "load_toy_model",
    "run_selftest",
    "save_toy_model",
    "train_toy_model",
]
