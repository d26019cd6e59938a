"""Joint byte-pair encoding, vocabularies and subword/word index maps.

Words are split into characters plus an end-of-word sentinel before merges
are learned. Applied subwords mark every non-final piece of a word with the
continuation marker (``"ab@@ c"``), so ``debpe`` is a plain string join.
A word that itself ends with the marker would be joined to its neighbor on
the way back, so such words are rejected when BPE is applied.
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Dict, Iterable, List, Sequence, Tuple, Union

from .errors import DataError, FormatError
from .export import atomic_write_text
from .models import AlignmentSet

logger = logging.getLogger(__name__)

END_OF_WORD = "</w>"
DEFAULT_MARKER = "@@"

PAD, BOS, EOS, UNK = 0, 1, 2, 3
RESERVED_TOKENS = ("<pad>", "<bos>", "<eos>", "<unk>")

Span = Tuple[int, int]


@dataclass(frozen=True)
class BpeModel:
    merges: Tuple[Tuple[str, str], ...]
    marker: str = DEFAULT_MARKER

    @property
    def num_merges(self) -> int:
        return len(self.merges)

    def ranks(self) -> Dict[Tuple[str, str], int]:
        return {pair: rank for rank, pair in enumerate(self.merges)}


@dataclass
class SubwordSentence:
    tokens: List[str]
    word_spans: List[Span] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.tokens)


# ── Learning ──


def _word_counts(corpus: Iterable[str]) -> Counter:
    counts: Counter = Counter()
    for line in corpus:
        counts.update(line.split())
    return counts


def _merge_symbols(symbols: Tuple[str, ...], pair: Tuple[str, str]) -> Tuple[str, ...]:
    out: List[str] = []
    k = 0
    while k < len(symbols):
        if k + 1 < len(symbols) and symbols[k] == pair[0] and symbols[k + 1] == pair[1]:
            out.append(pair[0] + pair[1])
            k += 2
        else:
            out.append(symbols[k])
            k += 1
    return tuple(out)


def learn_bpe_from_counts(counts: Counter, num_merges: int, marker: str = DEFAULT_MARKER) -> BpeModel:
    """Greedy most-frequent-pair merges; ties go to the lexicographically smallest pair."""
    if num_merges < 0:
        raise DataError(f"num_merges must be non-negative, got {num_merges}")
    vocab: Dict[Tuple[str, ...], int] = {tuple(word) + (END_OF_WORD,): freq for word, freq in counts.items()}
    merges: List[Tuple[str, str]] = []
    while len(merges) < num_merges:
        pairs: Counter = Counter()
        for symbols, freq in vocab.items():
            for a, b in zip(symbols, symbols[1:]):
                pairs[(a, b)] += freq
        if not pairs:
            logger.info("No learnable pairs left after %d merges", len(merges))
            break
        best = min(pairs.items(), key=lambda item: (-item[1], item[0]))[0]
        merges.append(best)
        merged: Dict[Tuple[str, ...], int] = {}
        for symbols, freq in vocab.items():
            key = _merge_symbols(symbols, best) if best[0] in symbols else symbols
            merged[key] = merged.get(key, 0) + freq
        vocab = merged
    return BpeModel(merges=tuple(merges), marker=marker)


def learn_joint_bpe(
    source_corpus: Iterable[str],
    target_corpus: Iterable[str],
    num_merges: int,
    marker: str = DEFAULT_MARKER,
) -> BpeModel:
    """Learn one merge list over the concatenated source and target corpora."""
    counts = _word_counts(source_corpus) + _word_counts(target_corpus)
    if not counts:
        raise DataError("cannot learn BPE merges from an empty corpus")
    model = learn_bpe_from_counts(counts, num_merges, marker)
    logger.info("Learned %d joint BPE merges over %d word types", model.num_merges, len(counts))
    return model


# ── Application ──


class BpeEncoder:
    """Applies a ``BpeModel`` with a per-word cache."""

    def __init__(self, model: BpeModel):
        self.model = model
        self._ranks = model.ranks()
        self._segment = lru_cache(maxsize=65536)(self._segment_word)

    def _segment_word(self, word: str) -> Tuple[str, ...]:
        symbols: Tuple[str, ...] = tuple(word) + (END_OF_WORD,)
        while len(symbols) > 1:
            candidates = [(self._ranks.get(pair, None), pair) for pair in zip(symbols, symbols[1:])]
            ranked = [(rank, pair) for rank, pair in candidates if rank is not None]
            if not ranked:
                break
            _, pair = min(ranked)
            symbols = _merge_symbols(symbols, pair)
        last = symbols[-1][: -len(END_OF_WORD)]
        pieces = list(symbols[:-1]) + ([last] if last else [])
        marker = self.model.marker
        return tuple(p + marker for p in pieces[:-1]) + (pieces[-1],)

    def encode(self, sentence: Union[str, Sequence[str]]) -> SubwordSentence:
        words = sentence.split() if isinstance(sentence, str) else list(sentence)
        tokens: List[str] = []
        spans: List[Span] = []
        for word in words:
            if word.endswith(self.model.marker):
                raise DataError(f"word {word!r} ends with the subword marker {self.model.marker!r}")
            pieces = self._segment(word)
            spans.append((len(tokens), len(tokens) + len(pieces)))
            tokens.extend(pieces)
        return SubwordSentence(tokens=tokens, word_spans=spans)


def apply_bpe(model: BpeModel, sentence: Union[str, Sequence[str]]) -> SubwordSentence:
    return BpeEncoder(model).encode(sentence)


def debpe(subwords: Union[str, Sequence[str]], marker: str = DEFAULT_MARKER) -> str:
    """Join subwords back into the whitespace-tokenized sentence."""
    text = subwords if isinstance(subwords, str) else " ".join(subwords)
    return text.replace(marker + " ", "").removesuffix(marker)


def spans_from_subwords(tokens: Sequence[str], marker: str = DEFAULT_MARKER) -> List[Span]:
    """Recover word spans from marked subwords."""
    spans: List[Span] = []
    start = 0
    for k, token in enumerate(tokens):
        if not token.endswith(marker):
            spans.append((start, k + 1))
            start = k + 1
    if start < len(tokens):
        spans.append((start, len(tokens)))
    return spans


# ── Alignment projection ──


def _owner_map(spans: Sequence[Span]) -> Dict[int, int]:
    owner: Dict[int, int] = {}
    for word, (start, end) in enumerate(spans):
        for k in range(start, end):
            owner[k] = word
    return owner


def project_alignment_to_words(
    subword_alignment: AlignmentSet,
    src_spans: Sequence[Span],
    tgt_spans: Sequence[Span],
) -> AlignmentSet:
    """A word pair is linked iff any of their subword pairs is linked."""
    src_owner = _owner_map(src_spans)
    tgt_owner = _owner_map(tgt_spans)
    words = set()
    for j, i in subword_alignment.links:
        if j not in src_owner or i not in tgt_owner:
            raise DataError(f"subword link {(j, i)} lies outside the word spans")
        words.add((src_owner[j], tgt_owner[i]))
    return AlignmentSet.of(words, len(src_spans), len(tgt_spans))


def expand_alignment_to_subwords(
    word_alignment: AlignmentSet,
    src_spans: Sequence[Span],
    tgt_spans: Sequence[Span],
) -> AlignmentSet:
    """Every subword pair of an aligned word pair becomes a link."""
    links = set()
    for j, i in word_alignment.links:
        if j >= len(src_spans) or i >= len(tgt_spans):
            raise DataError(
                f"word link {(j, i)} outside sentence of {len(src_spans)} source / {len(tgt_spans)} target words"
            )
        for sj in range(*src_spans[j]):
            for ti in range(*tgt_spans[i]):
                links.add((sj, ti))
    src_len = src_spans[-1][1] if src_spans else 0
    tgt_len = tgt_spans[-1][1] if tgt_spans else 0
    return AlignmentSet.of(links, src_len, tgt_len)


# ── Vocabulary ──


class Vocabulary:
    """Reserved tokens at fixed indices 0-3, then observed symbols."""

    def __init__(self, tokens: Sequence[str] = ()):
        self.itos: List[str] = list(RESERVED_TOKENS)
        self.stoi: Dict[str, int] = {tok: k for k, tok in enumerate(self.itos)}
        for tok in tokens:
            self.add(tok)

    def add(self, token: str) -> int:
        if token not in self.stoi:
            self.stoi[token] = len(self.itos)
            self.itos.append(token)
        return self.stoi[token]

    @classmethod
    def build(cls, sentences: Iterable[Sequence[str]]) -> "Vocabulary":
        seen: Dict[str, None] = {}
        for tokens in sentences:
            for tok in tokens:
                seen.setdefault(tok, None)
        return cls(sorted(seen))

    def __len__(self) -> int:
        return len(self.itos)

    def __contains__(self, token: str) -> bool:
        return token in self.stoi

    def encode(self, tokens: Sequence[str]) -> List[int]:
        return [self.stoi.get(tok, UNK) for tok in tokens]

    def decode(self, ids: Sequence[int], strip_special: bool = True) -> List[str]:
        out = []
        for k in ids:
            if strip_special and k < len(RESERVED_TOKENS):
                continue
            out.append(self.itos[k] if k < len(self.itos) else RESERVED_TOKENS[UNK])
        return out

    def save(self, path: Union[str, Path]) -> None:
        atomic_write_text(path, "".join(tok + "\n" for tok in self.itos))

    @classmethod
    def load(cls, path: Union[str, Path]) -> "Vocabulary":
        lines = Path(path).read_text(encoding="utf-8").split("\n")
        if lines and lines[-1] == "":
            lines.pop()
        if tuple(lines[: len(RESERVED_TOKENS)]) != RESERVED_TOKENS:
            raise FormatError("vocabulary does not start with the reserved tokens", 1, str(path))
        return cls(lines[len(RESERVED_TOKENS):])


# ── Merge files ──


def save_merges(model: BpeModel, path: Union[str, Path]) -> None:
    atomic_write_text(path, "".join(f"{a} {b}\n" for a, b in model.merges))


def load_merges(path: Union[str, Path], marker: str = DEFAULT_MARKER) -> BpeModel:
    merges = []
    for number, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        if not line:
            continue
        parts = line.split(" ")
        if len(parts) != 2 or not parts[0] or not parts[1]:
            raise FormatError(f"expected two symbols separated by one space, got {line!r}", number, str(path))
        merges.append((parts[0], parts[1]))
    if len(set(merges)) != len(merges):
        raise FormatError("merge list contains duplicates", None, str(path))
    return BpeModel(merges=tuple(merges), marker=marker)
