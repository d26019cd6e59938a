"""Tests for IBM Model 1, the HMM aligner and the lexicon file."""

import itertools

import numpy as np
import pytest

from alignment_pipeline.corpus import generate_synthetic_corpus
from alignment_pipeline.errors import DataError, ParameterError
from alignment_pipeline.evaluation import aer
from alignment_pipeline.models import AlignerConfig, AlignmentSet
from alignment_pipeline.statistical import (
    NULL_WORD,
    HmmParams,
    LexiconTable,
    _hmm_model,
    align_corpus_bidirectional,
    forward_backward,
    hmm_em,
    hmm_path_log_prob,
    ibm1_em,
    ibm1_posteriors,
    jump_components,
    lexicon_of,
    train_aligner,
    viterbi_align,
    viterbi_path,
    write_lexicon,
)

PAIRS = [
    ("a b".split(), "x y".split()),
    ("a".split(), "x".split()),
    ("b c".split(), "y z w".split()),
    ("c a".split(), "z x".split()),
    ("c".split(), "z".split()),
]


def _brute_force_posteriors(table: LexiconTable, src, tgt, use_null: bool) -> np.ndarray:
    words = ([NULL_WORD] if use_null else []) + list(src)
    posterior = np.zeros((len(words), len(tgt)))
    total = 0.0
    for assignment in itertools.product(range(len(words)), repeat=len(tgt)):
        p = np.prod([table.prob(f, words[j]) for f, j in zip(tgt, assignment)])
        total += p
        for i, j in enumerate(assignment):
            posterior[j, i] += p
    return posterior / total


def _monotone_corpus(size: int = 300):
    corpus, golds = generate_synthetic_corpus(11, size, vocab=20, scheme="identity", min_len=3, max_len=8)
    return corpus.pairs(), golds


def _random_hmm(rng, states: int, steps: int):
    initial = rng.dirichlet(np.ones(states))
    transition = rng.dirichlet(np.ones(states), size=states)
    emissions = rng.uniform(0.05, 1.0, size=(states, steps))
    return initial, transition, emissions


def _path_prob(initial, transition, emissions, path) -> float:
    p = initial[path[0]] * emissions[path[0], 0]
    for i in range(1, len(path)):
        p *= transition[path[i - 1], path[i]] * emissions[path[i], i]
    return p


class TestIbm1:
    @pytest.mark.parametrize("use_null", [True, False])
    def test_posteriors_match_enumeration(self, use_null):
        table = ibm1_em(PAIRS, iterations=3, use_null=use_null)
        for src, tgt in PAIRS:
            assert len(src) * len(tgt) <= 12
            expected = _brute_force_posteriors(table, src, tgt, use_null)
            np.testing.assert_allclose(ibm1_posteriors(table, src, tgt), expected, atol=1e-9)

    def test_log_likelihood_never_decreases(self):
        table = ibm1_em(PAIRS, iterations=6)
        assert len(table.history) == 7
        for before, after in zip(table.history, table.history[1:]):
            assert after >= before - 1e-9 * abs(before)

    def test_rows_are_distributions(self):
        table = ibm1_em(PAIRS, iterations=2)
        np.testing.assert_allclose(table.totals(), 1.0)

    def test_learns_lexicon(self):
        table = ibm1_em(PAIRS, iterations=10)
        assert table.prob("x", "a") > table.prob("y", "a")
        assert table.prob("z", "c") > table.prob("x", "c")

    def test_unknown_words_get_uniform(self):
        table = ibm1_em(PAIRS, iterations=1)
        assert table.prob("unseen", "a") == pytest.approx(table.uniform)

    def test_identical_sides_align_identical_words(self):
        corpus, _ = generate_synthetic_corpus(6, 100, vocab=30, scheme="identity")
        pairs = [(line.split(), line.split()) for line in corpus.source]
        table = ibm1_em(pairs, iterations=10)
        for src, tgt in pairs:
            for j, i in viterbi_align(table, src, tgt).links:
                assert src[j] == tgt[i]

    def test_invalid_inputs(self):
        with pytest.raises(ParameterError):
            ibm1_em(PAIRS, iterations=0)
        with pytest.raises(DataError):
            ibm1_em([([], ["x"])], iterations=1)


class TestViterbiAlign:
    def _table(self, null_value: float, word_value: float) -> LexiconTable:
        return LexiconTable([NULL_WORD, "a"], ["x"], {(0, 0): 0, (1, 0): 1}, np.array([null_value, word_value]))

    def test_null_loses_ties(self):
        assert viterbi_align(self._table(0.5, 0.5), ["a"], ["x"]).links == {(0, 0)}

    def test_null_wins_when_strictly_better(self):
        assert viterbi_align(self._table(0.6, 0.4), ["a"], ["x"]).links == frozenset()

    def test_empty_sentence(self):
        alignment = viterbi_align(self._table(0.5, 0.5), [], ["x"])
        assert alignment.links == frozenset()
        assert alignment.target_len == 1


class TestHmm:
    def test_jump_components_are_distributions(self):
        phi = jump_components(6, 3)
        assert phi.shape == (7, 6, 6)
        np.testing.assert_allclose(phi.sum(axis=2), 1.0)

    def test_forward_backward_matches_enumeration(self):
        rng = np.random.default_rng(0)
        initial, transition, emissions = _random_hmm(rng, 3, 4)
        posteriors, _, log_likelihood = forward_backward(initial, transition, emissions)
        paths = list(itertools.product(range(3), repeat=4))
        probs = np.array([_path_prob(initial, transition, emissions, p) for p in paths])
        assert log_likelihood == pytest.approx(np.log(probs.sum()), rel=1e-10)
        expected = np.zeros((4, 3))
        for p, prob in zip(paths, probs):
            for i, state in enumerate(p):
                expected[i, state] += prob
        np.testing.assert_allclose(posteriors, expected / probs.sum(), atol=1e-12)

    @pytest.mark.parametrize("seed", range(5))
    def test_viterbi_path_is_best(self, seed):
        rng = np.random.default_rng(seed)
        initial, transition, emissions = _random_hmm(rng, 3, 4)
        path = viterbi_path(initial, transition, emissions)
        best = max(itertools.product(range(3), repeat=4), key=lambda p: _path_prob(initial, transition, emissions, p))
        assert _path_prob(initial, transition, emissions, path) == pytest.approx(_path_prob(initial, transition, emissions, best))

    def test_monotone_corpus(self):
        pairs, golds = _monotone_corpus()
        config = AlignerConfig(model="hmm", ibm1_iterations=5, hmm_iterations=5)
        params = train_aligner(pairs, config)
        assert isinstance(params, HmmParams)
        assert params.mode_jump() == 1
        assert len(params.history) == 6
        for before, after in zip(params.history, params.history[1:]):
            assert after >= before - 1e-9 * abs(before)
        alignments = [viterbi_align(params, src, tgt) for src, tgt in pairs]
        assert aer(alignments, golds)[0].aer <= 0.02

    def test_viterbi_beats_random_paths(self):
        pairs, _ = _monotone_corpus(100)
        params = train_aligner(pairs, AlignerConfig(model="hmm", ibm1_iterations=3, hmm_iterations=2))
        rng = np.random.default_rng(1)
        for src, tgt in pairs[:10]:
            initial, transition, emissions = _hmm_model(params, params.lexicon.emission_matrix(src, tgt))
            best = hmm_path_log_prob(params, src, tgt, viterbi_path(initial, transition, emissions))
            for _ in range(20):
                random_path = list(rng.integers(0, 2 * len(src), size=len(tgt)))
                assert best >= hmm_path_log_prob(params, src, tgt, random_path) - 1e-9

    def test_zero_iterations_keeps_uniform_jumps(self):
        table = ibm1_em(PAIRS, iterations=1)
        params = hmm_em(PAIRS, 0, table, max_jump=2)
        np.testing.assert_allclose(params.jump_probs, 0.2)
        assert params.history == []

    def test_negative_iterations(self):
        with pytest.raises(ParameterError):
            hmm_em(PAIRS, -1, ibm1_em(PAIRS, 1))


class TestLexicon:
    def test_write_lexicon(self, tmp_path):
        table = LexiconTable(
            [NULL_WORD, "a"], ["x", "y"], {(1, 0): 0, (1, 1): 1, (0, 0): 2}, np.array([0.25, 0.75, 1.0])
        )
        write_lexicon(table, tmp_path / "lex.tsv")
        assert (tmp_path / "lex.tsv").read_text(encoding="utf-8") == "<null>\tx\t1\na\ty\t0.75\na\tx\t0.25\n"

    def test_threshold_drops_small_entries(self):
        table = LexiconTable([NULL_WORD, "a"], ["x"], {(1, 0): 0}, np.array([1e-9]))
        assert table.rows(1e-6) == []

    def test_lexicon_of(self):
        table = ibm1_em(PAIRS, 1)
        assert lexicon_of(table) is table
        params = hmm_em(PAIRS, 1, table)
        assert lexicon_of(params) is params.lexicon


class TestBidirectional:
    def test_symmetrized_links_stay_in_sentence(self):
        pairs, golds = _monotone_corpus(60)
        config = AlignerConfig(model="ibm1", ibm1_iterations=5)
        alignments = align_corpus_bidirectional(pairs, config)
        assert len(alignments) == len(pairs)
        for alignment, (src, tgt) in zip(alignments, pairs):
            assert isinstance(alignment, AlignmentSet)
            assert all(j < len(src) and i < len(tgt) for j, i in alignment.links)
        assert aer(alignments, golds)[0].aer < 0.2
