"""Tests for AER, the signed-rank test and corpus BLEU."""

import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import rankdata

from alignment_pipeline.errors import DataError
from alignment_pipeline.evaluation import (
    EXACT_LIMIT,
    aer,
    corpus_bleu,
    ngram_statistics,
    score_sentence,
    wilcoxon_signed_rank,
)
from alignment_pipeline.models import AlignmentSet, GoldAlignment
from alignment_pipeline.steps.s5_evaluate import evaluate_systems

grid_links = st.frozensets(st.tuples(st.integers(0, 3), st.integers(0, 3)), max_size=8)


def _gold(sure, possible=()):
    return GoldAlignment(sure=frozenset(sure), possible=frozenset(possible))


def _enumerated_p_value(d) -> float:
    d = np.asarray([x for x in d if x != 0])
    ranks = rankdata(np.abs(d))
    observed = abs(np.sum(np.sign(d) * ranks))
    extreme = 0
    for signs in itertools.product((-1, 1), repeat=d.size):
        if abs(np.dot(signs, ranks)) >= observed - 1e-9:
            extreme += 1
    return extreme / 2 ** d.size


class TestAer:
    def test_perfect_alignment(self):
        gold = _gold({(0, 0), (1, 1)})
        score = score_sentence(AlignmentSet.of({(0, 0), (1, 1)}), gold)
        assert score.aer == 0.0
        assert score.precision == 1.0
        assert score.recall == 1.0

    def test_hand_computed_with_possible_links(self):
        gold = _gold({(0, 0), (1, 1)}, {(1, 2)})
        hyp = AlignmentSet.of({(0, 0), (1, 2), (2, 2)})
        score = score_sentence(hyp, gold)
        # |A∩S| = 1, |A∩P| = 2, |A| = 3, |S| = 2
        assert score.aer == pytest.approx(1 - 3 / 5)
        assert score.precision == pytest.approx(2 / 3)
        assert score.recall == pytest.approx(1 / 2)
        assert (score.hyp_count, score.sure_count, score.possible_count) == (3, 2, 3)

    @settings(max_examples=1000, deadline=None)
    @given(grid_links, grid_links)
    def test_aer_is_one_minus_f1_when_possible_equals_sure(self, hyp, sure):
        score = score_sentence(AlignmentSet.of(hyp), _gold(sure, sure))
        total = score.precision + score.recall
        f1 = 2 * score.precision * score.recall / total if total else 0.0
        assert score.aer == pytest.approx(1 - f1, abs=1e-12)

    def test_aer_is_one_minus_f1_without_possible_links(self):
        gold = _gold({(0, 0), (1, 1), (2, 2), (3, 1)})
        hyp = AlignmentSet.of({(0, 0), (1, 2), (2, 2)})
        score = score_sentence(hyp, gold)
        f1 = 2 * score.precision * score.recall / (score.precision + score.recall)
        assert score.aer == pytest.approx(1 - f1)

    def test_empty_hypothesis(self):
        score = score_sentence(AlignmentSet(), _gold({(0, 0)}))
        assert score.precision == 1.0
        assert score.recall == 0.0
        assert score.aer == 1.0

    def test_both_empty(self):
        assert score_sentence(AlignmentSet(), _gold(())).aer == 0.0

    def test_corpus_is_micro_averaged(self):
        golds = [_gold({(0, 0)}), _gold({(0, 0), (1, 1), (2, 2)})]
        hyps = [AlignmentSet(), AlignmentSet.of({(0, 0), (1, 1), (2, 2)})]
        corpus, per_sentence = aer(hyps, golds)
        assert [s.aer for s in per_sentence] == [1.0, 0.0]
        assert corpus.aer == pytest.approx(1 - 6 / 7)

    def test_count_mismatch(self):
        with pytest.raises(DataError):
            aer([AlignmentSet()], [])


class TestWilcoxon:
    def test_five_positive_differences(self):
        result = wilcoxon_signed_rank([0.5, 0.4, 0.6, 0.3, 0.7], [0.1, 0.2, 0.1, 0.2, 0.1])
        assert result.exact
        assert result.n == 5
        assert result.statistic == pytest.approx(15.0)
        assert result.p_value == pytest.approx(0.0625)
        assert not result.significant

    def test_zero_differences_dropped(self):
        result = wilcoxon_signed_rank([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])
        assert result.n == 0
        assert result.p_value == 1.0

    @pytest.mark.parametrize("n", range(1, 11))
    @pytest.mark.parametrize("seed", range(3))
    def test_exact_matches_enumeration(self, n, seed):
        rng = np.random.default_rng(100 * n + seed)
        # small magnitudes so that tied ranks occur
        d = rng.integers(1, 4, size=n) * rng.choice([-1, 1], size=n) / 4.0
        result = wilcoxon_signed_rank(d, np.zeros(n))
        assert result.n == n
        assert result.exact
        assert result.p_value == pytest.approx(_enumerated_p_value(d), abs=1e-12)

    def test_normal_approximation_above_limit(self):
        rng = np.random.default_rng(3)
        a = rng.normal(size=EXACT_LIMIT + 20) + 1.0
        b = rng.normal(size=EXACT_LIMIT + 20)
        result = wilcoxon_signed_rank(a, b, alpha=0.05)
        assert not result.exact
        assert 0.0 <= result.p_value <= 1.0
        assert result.significant

    def test_alpha_threshold(self):
        a = np.arange(1, 21, dtype=float)
        result = wilcoxon_signed_rank(a, np.zeros(20), alpha=0.001)
        assert result.p_value == pytest.approx(2 / 2 ** 20)
        assert result.significant

    def test_length_mismatch(self):
        with pytest.raises(DataError):
            wilcoxon_signed_rank([1.0], [1.0, 2.0])


class TestEvaluateSystems:
    def test_rows_and_tests(self):
        golds = [_gold({(0, 0), (1, 1)}) for _ in range(6)]
        systems = {
            "base": [AlignmentSet.of({(0, 1)}) for _ in range(6)],
            "better": [AlignmentSet.of({(0, 0), (1, 1)}) for _ in range(6)],
        }
        rows, tests = evaluate_systems(systems, golds, baseline="base", alpha=0.05)
        assert [r.model for r in rows] == ["base", "better"]
        assert rows[0].p_value is None
        assert rows[1].baseline == "base"
        assert rows[1].aer == 0.0
        assert tests["better"].p_value == pytest.approx(2 / 64)
        assert tests["better"].significant

    def test_unknown_baseline(self):
        with pytest.raises(DataError):
            evaluate_systems({"a": [AlignmentSet()]}, [_gold(())], baseline="b")


class TestBleu:
    def test_identical(self):
        assert corpus_bleu(["a b c d e"], ["a b c d e"]) == pytest.approx(1.0)

    def test_hand_computed(self):
        hyp = ["the cat sat on the mat"]
        ref = ["the cat sat on a mat"]
        matches, totals, hyp_len, ref_len = ngram_statistics(hyp, ref)
        assert matches == [5, 3, 2, 1]
        assert totals == [6, 5, 4, 3]
        assert (hyp_len, ref_len) == (6, 6)
        expected = math.exp((math.log(5 / 6) + math.log(3 / 5) + math.log(2 / 4) + math.log(1 / 3)) / 4)
        assert corpus_bleu(hyp, ref) == pytest.approx(expected)
        smoothed = math.exp((math.log(5 / 6) + math.log(4 / 6) + math.log(3 / 5) + math.log(2 / 4)) / 4)
        assert corpus_bleu(hyp, ref, smooth=True) == pytest.approx(smoothed)

    def test_missing_order_scores_zero_unless_smoothed(self):
        assert corpus_bleu(["a b c x"], ["a b c d"]) == 0.0
        assert corpus_bleu(["a b c x"], ["a b c d"], smooth=True) > 0.0

    def test_brevity_penalty(self):
        score = corpus_bleu(["a b c d"], ["a b c d e f g h"])
        assert score == pytest.approx(math.exp(1 - 8 / 4))

    def test_clipped_counts(self):
        matches, totals, _, _ = ngram_statistics(["the the the"], ["the cat"], max_n=1)
        assert matches == [1]
        assert totals == [3]

    def test_empty_reference_rejected(self):
        with pytest.raises(DataError):
            corpus_bleu(["a"], [""])

    def test_empty_hypothesis_scores_zero(self):
        assert corpus_bleu([""], ["a b"]) == 0.0
