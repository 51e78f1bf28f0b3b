from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest

from fecs.backend.synthetic import SyntheticModelSpec, build_synthetic, random_synthetic_spec
from fecs.context import SegmentedSequence
from fecs.decoding import (
    ConfigError,
    DecodeConfig,
    _rescored_decode,
    decode,
    decode_beam,
    decode_contrastive,
    decode_fecs,
    decode_greedy,
    decode_nucleus,
)
from fecs.scoring import MixWeights, fecs_score

from conftest import one_hot_spec
from oracle import ref_enumerate_paths, ref_rescored_decode


def worked_seq():
    # Source is the single token 2; no prompt, nothing generated yet.
    return SegmentedSequence(tokens=(2,), s=0, c=1)


def cfg_for(strategy, alpha=0.0, beta=0.0, **kw):
    kw.setdefault("stop_on_eos", False)
    return DecodeConfig(strategy=strategy, weights=MixWeights(alpha, beta), **kw)


class TestWorkedFixture:
    def test_fecs_selects_source_token(self, worked_backend):
        cfg = cfg_for("fecs", alpha=0.3, beta=0.3, k=2, max_new_tokens=1)
        tokens, trace = decode_fecs(worked_seq(), cfg, worked_backend)
        assert tokens == [2]
        totals = {b.token_id: b.total for b in trace.steps[0].breakdowns}
        assert totals[0] == pytest.approx(0.16, abs=1e-12)
        assert totals[2] == pytest.approx(0.44, abs=1e-12)

    def test_contrastive_selects_confident_token(self, worked_backend):
        cfg = cfg_for("contrastive", alpha=0.6, k=2, max_new_tokens=1)
        tokens, trace = decode_contrastive(worked_seq(), cfg, worked_backend)
        assert tokens == [0]
        totals = {b.token_id: b.total for b in trace.steps[0].breakdowns}
        assert totals[0] == pytest.approx(0.16, abs=1e-12)
        assert totals[2] == pytest.approx(0.14, abs=1e-12)


class TestConfigGates:
    def test_fecs_rejects_beta_zero(self, worked_backend):
        cfg = cfg_for("fecs", alpha=0.3, beta=0.0, max_new_tokens=1)
        with pytest.raises(ConfigError, match="contrastive"):
            decode_fecs(worked_seq(), cfg, worked_backend)

    def test_fecs_requires_source_span(self, worked_backend):
        cfg = cfg_for("fecs", alpha=0.3, beta=0.3, max_new_tokens=1)
        seq = SegmentedSequence(tokens=(2,), s=1, c=1)
        with pytest.raises(ConfigError, match="source"):
            decode_fecs(seq, cfg, worked_backend)

    def test_contrastive_rejects_positive_beta(self, worked_backend):
        cfg = cfg_for("contrastive", alpha=0.3, beta=0.3, max_new_tokens=1)
        with pytest.raises(ConfigError):
            decode_contrastive(worked_seq(), cfg, worked_backend)

    def test_strategy_dispatch_mismatch(self, worked_backend):
        with pytest.raises(ConfigError):
            decode_greedy(worked_seq(), cfg_for("beam"), worked_backend)

    def test_alpha_beta_sum_checked(self):
        with pytest.raises(ValueError):
            cfg_for("fecs", alpha=0.7, beta=0.5)


class TestGreedy:
    def test_unique_maximizing_path(self):
        backend = build_synthetic(
            SyntheticModelSpec(
                vocab_size=4,
                hidden_dim=4,
                context_order=1,
                transition_table={k: np.array(v) for k, v in {
                    (0,): [0.0, 1.0, 0.0, 0.0],
                    (1,): [0.0, 0.0, 1.0, 0.0],
                    (2,): [1.0, 0.0, 0.0, 0.0],
                    (3,): [1.0, 0.0, 0.0, 0.0],
                }.items()},
                embedding_table=np.eye(4),
            )
        )
        seq = SegmentedSequence(tokens=(0,), s=0, c=1)
        tokens, _ = decode_greedy(seq, cfg_for("greedy", max_new_tokens=4), backend)
        assert tokens == [1, 2, 0, 1]

    def test_tie_breaks_to_lowest_id(self, worked_backend):
        backend = build_synthetic(one_hot_spec([0.25, 0.25, 0.25, 0.25]))
        tokens, _ = decode_greedy(
            SegmentedSequence(tokens=(1,), s=0, c=1),
            cfg_for("greedy", max_new_tokens=3),
            backend,
        )
        assert tokens == [0, 0, 0]

    def test_matches_contrastive_alpha_zero(self):
        for seed in range(10):
            backend = build_synthetic(random_synthetic_spec(seed, vocab_size=9, hidden_dim=5))
            seq = SegmentedSequence(tokens=(3, 1), s=0, c=2)
            greedy, _ = decode_greedy(seq, cfg_for("greedy", max_new_tokens=12), backend)
            cs, _ = decode_contrastive(
                seq, cfg_for("contrastive", alpha=0.0, k=4, max_new_tokens=12), backend
            )
            assert greedy == cs


class TestReductionChain:
    def test_fecs_beta_zero_equals_contrastive(self):
        for seed in range(10):
            backend = build_synthetic(
                random_synthetic_spec(seed + 50, vocab_size=10, hidden_dim=6, context_order=1)
            )
            seq = SegmentedSequence(tokens=(4, 2, 7), s=0, c=3)
            alpha = (seed % 5) / 5.0
            fecs_cfg = cfg_for("fecs", alpha=alpha, beta=0.0, k=4, max_new_tokens=16)
            fecs_tokens, _ = _rescored_decode(seq, fecs_cfg, backend, fecs_cfg.weights)
            cs_tokens, _ = decode_contrastive(
                seq, cfg_for("contrastive", alpha=alpha, k=4, max_new_tokens=16), backend
            )
            assert fecs_tokens == cs_tokens


class TestBeam:
    def test_width_one_equals_greedy(self):
        for seed in range(5):
            backend = build_synthetic(random_synthetic_spec(seed + 99, vocab_size=8))
            seq = SegmentedSequence(tokens=(1,), s=0, c=1)
            greedy, _ = decode_greedy(seq, cfg_for("greedy", max_new_tokens=10), backend)
            beam, _ = decode_beam(
                seq, cfg_for("beam", beam_width=1, max_new_tokens=10), backend
            )
            assert beam == greedy

    def test_two_step_lookahead_beats_greedy(self):
        # Token 1 is locally suboptimal (0.4 < 0.6) but leads to a 0.9-mass
        # continuation: best 2-step product is 0.4 * 0.9 = 0.36 via [1, 0].
        backend = build_synthetic(
            SyntheticModelSpec(
                vocab_size=3,
                hidden_dim=2,
                context_order=1,
                transition_table={
                    (2,): np.array([0.6, 0.4, 0.0]),
                    (0,): np.array([1 / 3, 1 / 3, 1 / 3]),
                    (1,): np.array([0.9, 0.05, 0.05]),
                },
                embedding_table=np.ones((3, 2)),
            )
        )
        seq = SegmentedSequence(tokens=(2,), s=0, c=1)
        greedy, _ = decode_greedy(seq, cfg_for("greedy", max_new_tokens=2), backend)
        beam, _ = decode_beam(seq, cfg_for("beam", beam_width=2, max_new_tokens=2), backend)
        # Exhaustive enumeration of every 2-step path confirms the optimum.
        paths = ref_enumerate_paths(backend, [2], 2)
        best_path, best_prob = max(paths, key=lambda item: (item[1], [-t for t in item[0]]))
        assert best_path == [1, 0] and best_prob == pytest.approx(0.36)
        assert beam == [1, 0]
        assert greedy == [0, 0]
        assert beam != greedy

    def test_width_four_runs(self):
        backend = build_synthetic(random_synthetic_spec(123, vocab_size=12))
        seq = SegmentedSequence(tokens=(0, 1), s=0, c=2)
        tokens, trace = decode_beam(seq, cfg_for("beam", beam_width=4, max_new_tokens=8), backend)
        assert len(tokens) == 8
        assert [s.position for s in trace.steps] == list(range(8))


class TestNucleus:
    def test_seed_reproducible(self):
        backend = build_synthetic(one_hot_spec([0.25, 0.25, 0.25, 0.25]))
        seq = SegmentedSequence(tokens=(0,), s=0, c=1)
        cfg = cfg_for("nucleus", nucleus_p=1.0, max_new_tokens=16, seed=11)
        a, _ = decode_nucleus(seq, cfg, backend)
        b, _ = decode_nucleus(seq, cfg, backend)
        assert a == b
        other, _ = decode_nucleus(
            seq, cfg_for("nucleus", nucleus_p=1.0, max_new_tokens=16, seed=12), backend
        )
        assert len(other) == 16

    def test_singleton_nucleus_is_deterministic(self):
        backend = build_synthetic(one_hot_spec([0.96, 0.02, 0.01, 0.01]))
        seq = SegmentedSequence(tokens=(1,), s=0, c=1)
        for seed in range(5):
            tokens, trace = decode_nucleus(
                seq, cfg_for("nucleus", nucleus_p=0.95, max_new_tokens=4, seed=seed), backend
            )
            assert tokens == [0, 0, 0, 0]
            assert all(len(s.candidates.items) == 1 for s in trace.steps)

    def test_p_095_runs(self):
        backend = build_synthetic(random_synthetic_spec(7, vocab_size=16))
        seq = SegmentedSequence(tokens=(2,), s=0, c=1)
        tokens, _ = decode_nucleus(
            seq, cfg_for("nucleus", nucleus_p=0.95, max_new_tokens=8, seed=0), backend
        )
        assert len(tokens) == 8

    def test_insufficient_mass_regrows_top_m(self):
        """A big-vocabulary backend whose default truncation misses p forces a
        re-query with a larger top_m."""
        from fecs.backend.base import Backend, BackendInfo, NextDistribution

        class WideBackend(Backend):
            def __init__(self):
                self.requested = []
                # 2000 tokens, heavy tail: top 512 cover ~0.51 < p
                weights = np.ones(2000)
                weights[:512] = 2.0
                self.probs = weights / weights.sum()

            def backend_info(self):
                return BackendInfo(2000, 4, 1999, 4096, "wide")

            def tokenize(self, text):
                return [0]

            def detokenize(self, ids):
                return "w"

            def next_distribution(self, tokens, top_m):
                self.requested.append(top_m)
                entries = tuple((i, float(self.probs[i])) for i in range(top_m))
                return NextDistribution(
                    entries=entries, truncation_mass=float(self.probs[:top_m].sum())
                )

            def context_hiddens(self, tokens):
                return np.zeros((len(tokens), 4))

            def candidate_hiddens(self, prefix, candidates):
                return np.zeros((len(candidates), 4))

        backend = WideBackend()
        seq = SegmentedSequence(tokens=(0,), s=0, c=1)
        tokens, _ = decode_nucleus(
            seq, cfg_for("nucleus", nucleus_p=0.95, max_new_tokens=1, seed=0), backend
        )
        assert len(tokens) == 1
        assert backend.requested[0] == 512
        assert backend.requested[-1] > 512


class TestStopsAndTruncation:
    def test_eos_stops_and_is_stripped(self):
        # Chain 0 -> 1 -> eos(3) deterministically.
        backend = build_synthetic(
            SyntheticModelSpec(
                vocab_size=4,
                hidden_dim=2,
                context_order=1,
                transition_table={
                    (0,): np.array([0.0, 1.0, 0.0, 0.0]),
                    (1,): np.array([0.0, 0.0, 0.0, 1.0]),
                },
                embedding_table=np.ones((4, 2)),
                eos_id=3,
            )
        )
        seq = SegmentedSequence(tokens=(0,), s=0, c=1)
        cfg = DecodeConfig(strategy="greedy", max_new_tokens=10, stop_on_eos=True)
        tokens, trace = decode_greedy(seq, cfg, backend)
        assert tokens == [1]
        assert [s.chosen for s in trace.steps] == [1, 3]

    def test_newline_token_stops_but_stays(self):
        spec = SyntheticModelSpec(
            vocab_size=3,
            hidden_dim=2,
            context_order=1,
            transition_table={
                (0,): np.array([0.0, 1.0, 0.0]),
                (1,): np.array([0.0, 0.0, 1.0]),
                (2,): np.array([1.0, 0.0, 0.0]),
            },
            embedding_table=np.ones((3, 2)),
            eos_id=0,
            token_strings=("a", "b\n", "c"),
        )
        backend = build_synthetic(spec)
        seq = SegmentedSequence(tokens=(0,), s=0, c=1)
        cfg = DecodeConfig(
            strategy="greedy", max_new_tokens=10, stop_on_eos=False, stop_on_newline=True
        )
        tokens, _ = decode_greedy(seq, cfg, backend)
        assert tokens == [1]

    def test_context_overflow_flags_truncated(self):
        spec = random_synthetic_spec(31, vocab_size=6, hidden_dim=3)
        backend = build_synthetic(
            SyntheticModelSpec(
                vocab_size=6,
                hidden_dim=3,
                context_order=1,
                transition_table=dict(spec.transition_table),
                embedding_table=spec.embedding_table,
                max_context=5,
            )
        )
        seq = SegmentedSequence(tokens=(0, 1, 2), s=0, c=3)
        cfg = cfg_for("fecs", alpha=0.3, beta=0.3, k=3, max_new_tokens=10)
        tokens, trace = decode_fecs(seq, cfg, backend)
        assert trace.truncated
        # 3 prompt tokens; steps run while len(cur)+1 <= 5, so exactly 2 fit.
        assert len(tokens) == 2


class TestTraceInvariants:
    @pytest.mark.parametrize("strategy,alpha,beta", [
        ("fecs", 0.3, 0.3),
        ("contrastive", 0.6, 0.0),
        ("greedy", 0.0, 0.0),
        ("nucleus", 0.0, 0.0),
        ("beam", 0.0, 0.0),
    ])
    def test_membership_and_positions(self, strategy, alpha, beta):
        backend = build_synthetic(random_synthetic_spec(77, vocab_size=10, hidden_dim=4))
        seq = SegmentedSequence(tokens=(1, 5), s=0, c=2)
        cfg = cfg_for(strategy, alpha=alpha, beta=beta, k=4, max_new_tokens=6, seed=5)
        _, trace = decode(seq, cfg, backend)
        positions = [s.position for s in trace.steps]
        assert positions == sorted(set(positions))
        for step in trace.steps:
            assert step.chosen in [c.token_id for c in step.candidates.items]
            assert step.elapsed >= 0.0

    @pytest.mark.parametrize("strategy,alpha,beta", [
        ("fecs", 0.3, 0.3),
        ("contrastive", 0.6, 0.0),
        ("greedy", 0.0, 0.0),
    ])
    def test_offline_rescoring_reproduces_totals(self, strategy, alpha, beta):
        backend = build_synthetic(random_synthetic_spec(88, vocab_size=12, hidden_dim=6))
        seq = SegmentedSequence(tokens=(2, 9, 4), s=0, c=3)
        cfg = cfg_for(strategy, alpha=alpha, beta=beta, k=4, max_new_tokens=8)
        _, trace = decode(seq, cfg, backend)
        w = MixWeights(alpha, beta)
        assert trace.steps
        for step in trace.steps:
            for b in step.breakdowns:
                again = fecs_score(b.confidence, b.penalty, b.reward, w)
                assert again == pytest.approx(b.total, abs=1e-12)


class TestDeterminism:
    def test_repeat_runs_identical(self):
        backend = build_synthetic(random_synthetic_spec(13, vocab_size=14, hidden_dim=7))
        seq = SegmentedSequence(tokens=(3, 8, 1), s=0, c=3)
        for strategy, alpha, beta in [
            ("fecs", 0.3, 0.3),
            ("contrastive", 0.6, 0.0),
            ("greedy", 0.0, 0.0),
            ("beam", 0.0, 0.0),
            ("nucleus", 0.0, 0.0),
        ]:
            cfg = cfg_for(strategy, alpha=alpha, beta=beta, k=4, max_new_tokens=10, seed=3)
            first, _ = decode(seq, cfg, backend)
            second, _ = decode(seq, cfg, backend)
            assert first == second

    def test_concurrent_sessions_identical(self):
        backend = build_synthetic(random_synthetic_spec(14, vocab_size=14, hidden_dim=7))
        seq = SegmentedSequence(tokens=(3, 8, 1), s=0, c=3)
        cfg = cfg_for("fecs", alpha=0.3, beta=0.3, k=4, max_new_tokens=12)
        serial = decode(seq, cfg, backend)[0]
        with ThreadPoolExecutor(max_workers=4) as pool:
            futures = [pool.submit(decode, seq, cfg, backend) for _ in range(8)]
            results = [f.result()[0] for f in futures]
        assert all(r == serial for r in results)


class TestReferenceDecoder:
    def test_no_cache_reference_matches_engine(self):
        for seed in range(8):
            backend = build_synthetic(
                random_synthetic_spec(seed + 300, vocab_size=11, hidden_dim=5, context_order=1)
            )
            seq = SegmentedSequence(tokens=(5, 2, 8, 1), s=1, c=4)
            cfg = cfg_for("fecs", alpha=0.3, beta=0.3, k=4, max_new_tokens=12)
            engine_tokens, trace = decode_fecs(seq, cfg, backend)
            ref_tokens, ref_scores = ref_rescored_decode(
                list(seq.tokens), seq.s, seq.c, backend, k=4, alpha=0.3, beta=0.3,
                max_new_tokens=12,
            )
            assert engine_tokens == ref_tokens
            for step, scores in zip(trace.steps, ref_scores):
                for b in step.breakdowns:
                    assert b.total == pytest.approx(scores[b.token_id], abs=1e-12)
