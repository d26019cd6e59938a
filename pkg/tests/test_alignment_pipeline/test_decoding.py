"""Tests for beam search and attention capture during decoding."""

import numpy as np
import pytest

from alignment_pipeline.bpe import BOS, EOS
from alignment_pipeline.decoding import Hypothesis, beam_decode, beam_search, greedy_decode
from alignment_pipeline.errors import ParameterError
from alignment_pipeline.models import ModelConfig
from alignment_pipeline.transformer import Transformer

V = 6
NEVER = np.log(1e-9)


def _row(**probs) -> np.ndarray:
    row = np.full(V, NEVER)
    for token, p in probs.items():
        row[int(token[1:])] = np.log(p)
    return row


def _table_step(table):
    def step(prefixes):
        return np.stack([table[tuple(prefix)] for prefix in prefixes])

    return step


def _random_step(seed: int):
    def step(prefixes):
        rows = []
        for prefix in prefixes:
            rng = np.random.default_rng([seed, *prefix])
            logits = rng.normal(size=V)
            rows.append(logits - np.log(np.exp(logits).sum()))
        return np.stack(rows)

    return step


def _greedy_reference(step_fn, max_len: int):
    prefix, logprob = [BOS], 0.0
    for _ in range(max_len):
        row = step_fn([prefix])[0]
        tok = int(np.argmax(row))
        logprob += float(row[tok])
        prefix.append(tok)
        if tok == EOS:
            return prefix[1:], logprob, False
    return prefix[1:] + [EOS], logprob, True


class TestBeamSearch:
    def test_beam_finds_better_sequence_than_greedy(self):
        table = {
            (BOS,): _row(t4=0.6, t5=0.4),
            (BOS, 4): _row(t2=0.34, t4=0.33, t5=0.33),
            (BOS, 5): _row(t2=0.99, t4=0.01),
        }
        greedy = beam_search(_table_step(table), beam_size=1, max_len=5)[0]
        beam = beam_search(_table_step(table), beam_size=2, max_len=5)[0]
        assert greedy.tokens == [4, EOS]
        assert beam.tokens == [5, EOS]
        assert beam.logprob == pytest.approx(np.log(0.4 * 0.99))

    @pytest.mark.parametrize("seed", range(10))
    def test_beam_one_equals_greedy(self, seed):
        step = _random_step(seed)
        tokens, logprob, truncated = _greedy_reference(step, max_len=8)
        best = beam_search(step, beam_size=1, max_len=8)[0]
        assert best.tokens == tokens
        assert best.logprob == pytest.approx(logprob)
        assert best.truncated == truncated

    def test_truncation_closes_with_eos(self):
        def never_stops(prefixes):
            return np.stack([_row(t3=0.9, t2=0.1) for _ in prefixes])

        hyps = beam_search(never_stops, beam_size=1, max_len=3)
        assert hyps[0].tokens == [3, 3, 3, EOS]
        assert hyps[0].truncated
        assert hyps[0].output == [3, 3, 3]

    def test_results_sorted_by_normalized_score(self):
        hyps = beam_search(_random_step(3), beam_size=4, max_len=6)
        scores = [h.score for h in hyps]
        assert scores == sorted(scores, reverse=True)

    def test_invalid_parameters(self):
        with pytest.raises(ParameterError):
            beam_search(_random_step(0), beam_size=0)
        with pytest.raises(ParameterError):
            beam_search(_random_step(0), max_len=0)


class TestHypothesis:
    def test_score_is_length_normalized(self):
        assert Hypothesis(tokens=[4, 5, EOS], logprob=-3.0).score == pytest.approx(-1.0)

    def test_output_strips_eos(self):
        assert Hypothesis(tokens=[4, 5, EOS], logprob=0.0).output == [4, 5]
        assert Hypothesis(tokens=[4, 5], logprob=0.0).output == [4, 5]


class TestModelDecoding:
    def _model(self):
        return Transformer(ModelConfig(d_emb=16, n_layers=2, n_heads=2, d_ff=32, dropout=0.1, max_positions=32), 10, seed=4)

    def test_beam_decode_captures_attention(self):
        model = self._model()
        hyp = beam_decode(model, [4, 5, 6], beam_size=3, max_len=6)
        assert hyp.tokens[-1] == EOS
        assert len(hyp.tokens) <= 7
        assert hyp.attention.n_layers == 2
        assert hyp.attention.head(1, 1).shape == (len(hyp.tokens), 4)
        assert model.training

    def test_greedy_is_beam_one(self):
        model = self._model()
        a = greedy_decode(model, [7, 8], max_len=5)
        b = beam_decode(model, [7, 8], beam_size=1, max_len=5)
        assert a.tokens == b.tokens
