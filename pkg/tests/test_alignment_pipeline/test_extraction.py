"""Tests for attention-to-alignment conversion and grow-diagonal symmetrization."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from alignment_pipeline.bpe import learn_joint_bpe
from alignment_pipeline.corpus import ParallelCorpus, PreparedCorpus
from alignment_pipeline.errors import ContractError, ParameterError
from alignment_pipeline.extraction import (
    attention_to_alignment,
    average_attention,
    collect_attention,
    discretize,
    extract_alignment_head,
    extract_layer_average,
    renormalize_columns,
    symmetrize_corpus,
    symmetrize_grow_diagonal,
)
from alignment_pipeline.models import AlignmentSet, ModelConfig, MultiTaskConfig
from alignment_pipeline.transformer import AttentionStack, Transformer


def _grow_diag_reference(forward, reverse, final_step):
    union = set(forward) | set(reverse)
    alignment = set(forward) & set(reverse)

    def source_aligned(j):
        return any(a == j for a, _ in alignment)

    def target_aligned(i):
        return any(b == i for _, b in alignment)

    added = True
    while added:
        added = False
        for j, i in sorted(alignment, key=lambda link: (link[1], link[0])):
            for dj in (-1, 0, 1):
                for di in (-1, 0, 1):
                    cand = (j + dj, i + di)
                    if (dj, di) == (0, 0) or cand not in union or cand in alignment:
                        continue
                    if not source_aligned(cand[0]) or not target_aligned(cand[1]):
                        alignment.add(cand)
                        added = True
    if final_step:
        for j, i in sorted(union, key=lambda link: (link[1], link[0])):
            if not source_aligned(j) and not target_aligned(i):
                alignment.add((j, i))
    return alignment


@st.composite
def directional_pair(draw):
    source_len = draw(st.integers(1, 4))
    target_len = draw(st.integers(1, 4))
    grid = [(j, i) for j in range(source_len) for i in range(target_len)]
    forward = draw(st.sets(st.sampled_from(grid)))
    reverse = draw(st.sets(st.sampled_from(grid)))
    return source_len, target_len, forward, reverse


class TestMatrices:
    def test_renormalize_drops_special_columns(self):
        matrix = np.array([[0.2, 0.3, 0.5], [0.1, 0.1, 0.8], [0.3, 0.3, 0.4]])
        np.testing.assert_allclose(renormalize_columns(matrix, 2, 2), [[0.4, 0.6], [0.5, 0.5]])

    def test_renormalize_zero_row_stays_zero(self):
        out = renormalize_columns(np.array([[0.0, 0.0, 1.0]]), 2, 1)
        np.testing.assert_array_equal(out, [[0.0, 0.0]])

    def test_argmax_ties_go_to_smallest_source(self):
        assert discretize(np.array([[0.5, 0.5], [0.2, 0.8]])).links == {(0, 0), (1, 1)}

    def test_eos_column_never_linked(self):
        matrix = np.array([[0.1, 0.2, 0.7], [0.3, 0.1, 0.6], [0.3, 0.3, 0.4]])
        alignment = attention_to_alignment(matrix, 2, 2)
        assert alignment.links == {(1, 0), (0, 1)}
        assert (alignment.source_len, alignment.target_len) == (2, 2)

    def test_average_attention_scopes(self):
        stack = AttentionStack(layers=[np.stack([np.eye(2), np.zeros((2, 2))]), np.stack([np.ones((2, 2)), np.ones((2, 2))])])
        np.testing.assert_allclose(average_attention(stack, 1), 0.5 * np.eye(2))
        np.testing.assert_allclose(average_attention(stack, "all"), (np.eye(2) + 2 * np.ones((2, 2))) / 4)
        with pytest.raises(ParameterError):
            average_attention(stack, 3)
        with pytest.raises(ParameterError):
            average_attention(AttentionStack(layers=[]))


class TestGrowDiagonal:
    def test_grows_toward_union(self):
        forward = AlignmentSet.of([(0, 0), (1, 1), (2, 1)])
        reverse = AlignmentSet.of([(0, 0), (1, 1), (2, 2)])
        assert symmetrize_grow_diagonal(forward, reverse).links == {(0, 0), (1, 1), (2, 1), (2, 2)}

    def test_final_step_adds_isolated_links(self):
        forward = AlignmentSet.of([(0, 0), (2, 2)])
        reverse = AlignmentSet.of([(0, 0)])
        assert symmetrize_grow_diagonal(forward, reverse).links == {(0, 0)}
        assert symmetrize_grow_diagonal(forward, reverse, final_step=True).links == {(0, 0), (2, 2)}

    def test_length_mismatch(self):
        with pytest.raises(ContractError):
            symmetrize_grow_diagonal(AlignmentSet.of([], 2, 2), AlignmentSet.of([], 3, 2))

    def test_corpus_transposes_reverse(self):
        forward = [AlignmentSet.of([(0, 1), (1, 0)])]
        reverse = [AlignmentSet.of([(1, 0), (0, 1)])]
        assert symmetrize_corpus(forward, reverse)[0].links == {(0, 1), (1, 0)}
        already = [AlignmentSet.of([(0, 1)])]
        assert symmetrize_corpus(forward, already, reverse_is_transposed=True)[0].links == {(0, 1), (1, 0)}

    def test_corpus_count_mismatch(self):
        with pytest.raises(ContractError):
            symmetrize_corpus([AlignmentSet()], [])

    @settings(max_examples=1000, deadline=None)
    @given(directional_pair(), st.booleans())
    def test_matches_reference(self, pair, final_step):
        source_len, target_len, forward, reverse = pair
        out = symmetrize_grow_diagonal(
            AlignmentSet.of(forward, source_len, target_len), AlignmentSet.of(reverse, source_len, target_len), final_step
        )
        assert out.links == _grow_diag_reference(forward, reverse, final_step)
        assert forward & reverse <= out.links <= forward | reverse


class TestForcedDecoding:
    def _setup(self):
        corpus = ParallelCorpus(
            ["ab cd ef", "cd ab", "ef ef ab cd"],
            ["uv wx", "yz uv wx", "wx yz"],
        )
        bpe = learn_joint_bpe(corpus.source, corpus.target, 3)
        data = PreparedCorpus.from_corpus(corpus, bpe)
        model = Transformer(ModelConfig(d_emb=16, n_layers=2, n_heads=2, d_ff=32, dropout=0.0, max_positions=32), len(data.vocab), seed=5)
        return corpus, data, model

    def test_collect_attention_independent_of_batching(self):
        _, data, model = self._setup()
        sources, targets = data.ids()
        one_by_one = collect_attention(model, sources, targets, max_tokens=1)
        batched = collect_attention(model, sources, targets, max_tokens=1000)
        assert len(one_by_one) == len(batched) == len(sources)
        for a, b in zip(one_by_one, batched):
            for la, lb in zip(a.layers, b.layers):
                assert la.shape == lb.shape
                np.testing.assert_allclose(la, lb, atol=1e-5)

    def test_collect_attention_shapes(self):
        _, data, model = self._setup()
        sources, targets = data.ids()
        stacks = collect_attention(model, sources, targets)
        for stack, src, tgt in zip(stacks, sources, targets):
            assert stack.n_layers == 2
            assert stack.layers[0].shape == (2, len(tgt) + 1, len(src) + 1)

    def test_layer_average_links_every_target_word(self):
        corpus, data, model = self._setup()
        alignments = extract_layer_average(model, data.vocab, data.pairs, 1)
        for alignment, (src, tgt) in zip(alignments, corpus.pairs()):
            assert alignment.source_len == len(src)
            assert alignment.target_len == len(tgt)
            assert {i for _, i in alignment.links} == set(range(len(tgt)))

    def test_alignment_head_uses_configured_head(self):
        corpus, data, model = self._setup()
        multitask = MultiTaskConfig(align_layer=2, align_head=2, full_context=False)
        alignments = extract_alignment_head(model, data.vocab, data.pairs, multitask)
        assert len(alignments) == len(corpus)
        with pytest.raises(ParameterError):
            extract_alignment_head(model, data.vocab, data.pairs, MultiTaskConfig(align_layer=3))
        with pytest.raises(ParameterError):
            extract_alignment_head(model, data.vocab, data.pairs, MultiTaskConfig(align_head=3))

    def test_mismatched_counts(self):
        _, data, model = self._setup()
        sources, targets = data.ids()
        with pytest.raises(ContractError):
            collect_attention(model, sources, targets[:1])
