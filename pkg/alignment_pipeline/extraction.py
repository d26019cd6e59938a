"""From attention probabilities to discrete word alignments.

Attention is harvested by forced decoding of reference pairs. Columns of the
source ⟨eos⟩ and padding are dropped and rows renormalized before any argmax,
and the target ⟨eos⟩ row is skipped, so special tokens never produce links.
"""

from __future__ import annotations

import logging
from itertools import product
from typing import List, Literal, Optional, Sequence, Set, Tuple, Union

import numpy as np
from tqdm import tqdm

from .bpe import SubwordSentence, Vocabulary, project_alignment_to_words
from .errors import ContractError, ParameterError
from .models import AlignmentSet, Link, MultiTaskConfig
from .tensor import no_grad
from .transformer import AttentionStack, Batch, Transformer

logger = logging.getLogger(__name__)

Scope = Union[int, Literal["all"]]

NEIGHBORS: Tuple[Tuple[int, int], ...] = tuple(d for d in product((-1, 0, 1), repeat=2) if d != (0, 0))


# ── Matrix operations ──


def average_attention(stack: AttentionStack, scope: Scope = "all") -> np.ndarray:
    """Mean over one layer's heads (1-based ``scope``) or over every head of every layer."""
    if not stack.layers:
        raise ParameterError("cannot average an empty attention stack")
    if scope == "all":
        return np.concatenate(stack.layers, axis=0).mean(axis=0)
    if not isinstance(scope, (int, np.integer)) or not 1 <= scope <= stack.n_layers:
        raise ParameterError(f"layer {scope} outside [1, {stack.n_layers}]")
    return stack.layers[scope - 1].mean(axis=0)


def renormalize_columns(matrix: np.ndarray, src_len: int, tgt_len: int) -> np.ndarray:
    """Keep the first ``tgt_len`` rows and ``src_len`` columns and rescale rows to sum to 1."""
    kept = np.asarray(matrix, dtype=np.float64)[:tgt_len, :src_len]
    totals = kept.sum(axis=1, keepdims=True)
    return np.divide(kept, totals, out=np.zeros_like(kept), where=totals > 0)


def discretize(avg: np.ndarray, rows: Optional[int] = None) -> AlignmentSet:
    """Link every target row to its most attended source column; ties go to the smallest j."""
    avg = np.asarray(avg)
    rows = avg.shape[0] if rows is None else rows
    if avg.shape[1] == 0:
        return AlignmentSet.of((), 0, rows)
    links = [(int(np.argmax(avg[i])), i) for i in range(rows)]
    return AlignmentSet.of(links, avg.shape[1], rows)


def attention_to_alignment(matrix: np.ndarray, src_len: int, tgt_len: int) -> AlignmentSet:
    """Discretize a captured [I+1, J+1] matrix over the real tokens only."""
    return discretize(renormalize_columns(matrix, src_len, tgt_len))


# ── Forced decoding ──


def collect_attention(
    model: Transformer,
    sources: Sequence[Sequence[int]],
    targets: Sequence[Sequence[int]],
    causal: bool = True,
    max_tokens: int = 1000,
    show_progress: bool = False,
) -> List[AttentionStack]:
    """Force-decode every pair and return its attention, rows = target tokens + ⟨eos⟩."""
    if len(sources) != len(targets):
        raise ContractError(f"{len(sources)} sources but {len(targets)} targets")
    stacks: List[AttentionStack] = []
    was_training = model.training
    model.eval()
    try:
        with no_grad():
            start = 0
            bar = tqdm(total=len(sources), desc="forced decode", disable=not show_progress)
            while start < len(sources):
                end = start + 1
                while end < len(sources) and sum(len(t) + 1 for t in targets[start : end + 1]) <= max_tokens:
                    end += 1
                batch = Batch.from_pairs(sources[start:end], targets[start:end])
                out = model.forward(batch, causal=causal)
                for row in range(batch.size):
                    stacks.append(
                        AttentionStack.from_batch(
                            out.attention, row, int(batch.tgt_lengths[row]), int(batch.src_lengths[row])
                        )
                    )
                bar.update(end - start)
                start = end
            bar.close()
    finally:
        model.train(was_training)
    return stacks


def _encode_pairs(vocab: Vocabulary, pairs: Sequence[Tuple[SubwordSentence, SubwordSentence]]):
    sources = [vocab.encode(src.tokens) for src, _ in pairs]
    targets = [vocab.encode(tgt.tokens) for _, tgt in pairs]
    return sources, targets


def _project(subword: List[AlignmentSet], pairs: Sequence[Tuple[SubwordSentence, SubwordSentence]]) -> List[AlignmentSet]:
    return [project_alignment_to_words(a, src.word_spans, tgt.word_spans) for a, (src, tgt) in zip(subword, pairs)]


def subword_alignments_from_stacks(
    stacks: Sequence[AttentionStack],
    pairs: Sequence[Tuple[SubwordSentence, SubwordSentence]],
    select,
) -> List[AlignmentSet]:
    return [attention_to_alignment(select(stack), len(src), len(tgt)) for stack, (src, tgt) in zip(stacks, pairs)]


def extract_layer_average(
    model: Transformer,
    vocab: Vocabulary,
    pairs: Sequence[Tuple[SubwordSentence, SubwordSentence]],
    scope: Scope = "all",
    max_tokens: int = 1000,
) -> List[AlignmentSet]:
    """Word alignments from head-averaged attention of one decoder layer, or of all layers."""
    sources, targets = _encode_pairs(vocab, pairs)
    stacks = collect_attention(model, sources, targets, causal=True, max_tokens=max_tokens)
    subword = subword_alignments_from_stacks(stacks, pairs, lambda s: average_attention(s, scope))
    return _project(subword, pairs)


def extract_alignment_head(
    model: Transformer,
    vocab: Vocabulary,
    pairs: Sequence[Tuple[SubwordSentence, SubwordSentence]],
    multitask: MultiTaskConfig,
    max_tokens: int = 1000,
) -> List[AlignmentSet]:
    """Word alignments read off the supervised head.

    Uses the unmasked decoder pass when the model was trained with full target
    context, the masked pass otherwise.
    """
    layer = multitask.resolved_layer(model.config.n_layers)
    head = multitask.resolved_head(model.config.n_heads)
    sources, targets = _encode_pairs(vocab, pairs)
    stacks = collect_attention(model, sources, targets, causal=not multitask.full_context, max_tokens=max_tokens)
    subword = subword_alignments_from_stacks(stacks, pairs, lambda s: s.head(layer, head))
    return _project(subword, pairs)


# ── Symmetrization ──


def symmetrize_grow_diagonal(forward: AlignmentSet, reverse: AlignmentSet, final_step: bool = False) -> AlignmentSet:
    """Grow the intersection of two directional alignments toward their union.

    Each sweep visits the links present at its start in ascending (i, j) order
    and adds any 8-neighbor that is in the union and leaves one of its two
    words unaligned. Sweeps repeat until nothing is added. ``reverse`` must
    already be in (source, target) orientation.
    """
    for name in ("source_len", "target_len"):
        a, b = getattr(forward, name), getattr(reverse, name)
        if a is not None and b is not None and a != b:
            raise ContractError(f"directional alignments disagree on {name}: {a} vs {b}")
    source_len = forward.source_len if forward.source_len is not None else reverse.source_len
    target_len = forward.target_len if forward.target_len is not None else reverse.target_len

    union = forward.links | reverse.links
    current: Set[Link] = set(forward.links & reverse.links)
    aligned_src = {j for j, _ in current}
    aligned_tgt = {i for _, i in current}

    grew = True
    while grew:
        grew = False
        for j, i in sorted(current, key=lambda link: (link[1], link[0])):
            for dj, di in NEIGHBORS:
                nj, ni = j + dj, i + di
                if (nj, ni) in union and (nj, ni) not in current and (nj not in aligned_src or ni not in aligned_tgt):
                    current.add((nj, ni))
                    aligned_src.add(nj)
                    aligned_tgt.add(ni)
                    grew = True

    if final_step:
        for j, i in sorted(union, key=lambda link: (link[1], link[0])):
            if j not in aligned_src and i not in aligned_tgt:
                current.add((j, i))
                aligned_src.add(j)
                aligned_tgt.add(i)

    return AlignmentSet.of(current, source_len, target_len)


def symmetrize_corpus(
    forward: Sequence[AlignmentSet],
    reverse: Sequence[AlignmentSet],
    final_step: bool = False,
    reverse_is_transposed: bool = False,
) -> List[AlignmentSet]:
    """Symmetrize per sentence; ``reverse`` holds (target, source) links unless already transposed."""
    if len(forward) != len(reverse):
        raise ContractError(f"{len(forward)} forward alignments but {len(reverse)} reverse alignments")
    return [
        symmetrize_grow_diagonal(f, r if reverse_is_transposed else r.transpose(), final_step)
        for f, r in zip(forward, reverse)
    ]
