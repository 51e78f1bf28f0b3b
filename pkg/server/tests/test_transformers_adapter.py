"""The transformers-backed service is exercised with a randomly initialized
GPT-2-class model built locally (no downloads): the geometric contracts are
architectural, so they must hold for untrained weights too."""

import pytest

transformers = pytest.importorskip("transformers")

from fecs_server.selftest import first_failure, run_selftest
from fecs_server.service import TransformersService


class TinyIdTokenizer:
    """Minimal tokenizer stand-in: text is a space-separated id list."""

    def __init__(self, vocab_size, eos_token_id):
        self.vocab_size = vocab_size
        self.eos_token_id = eos_token_id

    def encode(self, text):
        return [int(part) % self.vocab_size for part in text.split()]

    def decode(self, ids):
        return " ".join(str(i) for i in ids)


@pytest.fixture(scope="module")
def gpt2_service():
    import torch

    torch.manual_seed(11)
    config = transformers.GPT2Config(
        vocab_size=96, n_positions=128, n_embd=48, n_layer=2, n_head=4,
        resid_pdrop=0.0, embd_pdrop=0.0, attn_pdrop=0.0,
    )
    model = transformers.GPT2LMHeadModel(config)
    tokenizer = TinyIdTokenizer(vocab_size=96, eos_token_id=0)
    return TransformersService(model, tokenizer, name="gpt2-random")


def test_info_read_from_model_config(gpt2_service):
    assert gpt2_service.vocab_size == 96
    assert gpt2_service.hidden_dim == 48
    assert gpt2_service.max_context == 128


def test_selftest_probes_pass(gpt2_service):
    results = run_selftest(gpt2_service)
    assert first_failure(results) is None


def test_full_softmax_mass(gpt2_service):
    probs = gpt2_service.next_probs([1, 2, 3])
    assert abs(float(probs.sum()) - 1.0) <= 1e-6


def test_last_hidden_state_is_served(gpt2_service):
    hiddens = gpt2_service.hiddens([4, 5, 6, 7])
    assert hiddens.shape == (4, 48)
