"""Parallel corpora, Pharaoh alignment files and the synthetic permutation corpus."""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple, Union

import numpy as np

from .bpe import BpeEncoder, BpeModel, SubwordSentence, Vocabulary
from .errors import DataError, FormatError, ParameterError
from .export import atomic_write_text
from .models import AlignmentSet, GoldAlignment, Link

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

_TOKEN_PATTERN = re.compile(r"\w+(?:[-']\w+)*|[^\w\s]", re.UNICODE)


def tokenize(line: str) -> str:
    """Whitespace + punctuation rule tokenizer; returns space-joined tokens."""
    return " ".join(_TOKEN_PATTERN.findall(line))


@dataclass
class ParallelCorpus:
    source: List[str]
    target: List[str]

    def __post_init__(self) -> None:
        if len(self.source) != len(self.target):
            raise DataError(f"source has {len(self.source)} lines but target has {len(self.target)}")

    def __len__(self) -> int:
        return len(self.source)

    def pairs(self) -> List[Tuple[List[str], List[str]]]:
        return [(s.split(), t.split()) for s, t in zip(self.source, self.target)]

    def subset(self, indices: Sequence[int]) -> "ParallelCorpus":
        return ParallelCorpus(
            source=[self.source[k] for k in indices],
            target=[self.target[k] for k in indices],
        )

    def swapped(self) -> "ParallelCorpus":
        return ParallelCorpus(self.target, self.source)


@dataclass
class PreparedCorpus:
    """Subword-segmented sentence pairs plus the vocabulary that indexes them."""

    pairs: List[Tuple[SubwordSentence, SubwordSentence]]
    vocab: Vocabulary

    def __len__(self) -> int:
        return len(self.pairs)

    @classmethod
    def from_corpus(cls, corpus: ParallelCorpus, bpe: BpeModel, vocab: Optional[Vocabulary] = None) -> "PreparedCorpus":
        encoder = BpeEncoder(bpe)
        pairs = [(encoder.encode(s), encoder.encode(t)) for s, t in zip(corpus.source, corpus.target)]
        if vocab is None:
            vocab = Vocabulary.build(sent.tokens for pair in pairs for sent in pair)
        return cls(pairs=pairs, vocab=vocab)

    def ids(self) -> Tuple[List[List[int]], List[List[int]]]:
        return (
            [self.vocab.encode(src.tokens) for src, _ in self.pairs],
            [self.vocab.encode(tgt.tokens) for _, tgt in self.pairs],
        )

    def subset(self, indices: Sequence[int]) -> "PreparedCorpus":
        return PreparedCorpus([self.pairs[k] for k in indices], self.vocab)

    def swapped(self) -> "PreparedCorpus":
        return PreparedCorpus([(tgt, src) for src, tgt in self.pairs], self.vocab)


def read_lines(path: PathLike) -> List[str]:
    text = Path(path).read_text(encoding="utf-8")
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    return [line.rstrip("\r") for line in lines]


def write_lines(path: PathLike, lines: Iterable[str]) -> None:
    atomic_write_text(path, "".join(line + "\n" for line in lines))


def load_parallel_corpus(source_path: PathLike, target_path: PathLike, pre_tokenize: bool = False) -> ParallelCorpus:
    source = read_lines(source_path)
    target = read_lines(target_path)
    if len(source) != len(target):
        raise DataError(f"{source_path} has {len(source)} lines but {target_path} has {len(target)}")
    if pre_tokenize:
        source = [tokenize(line) for line in source]
        target = [tokenize(line) for line in target]
    else:
        source = [" ".join(line.split()) for line in source]
        target = [" ".join(line.split()) for line in target]
    logger.info("Loaded %d sentence pairs from %s / %s", len(source), source_path, target_path)
    return ParallelCorpus(source=source, target=target)


def filter_corpus(corpus: ParallelCorpus, max_words: int = 100, max_ratio: float = 1.5) -> Tuple[ParallelCorpus, List[int]]:
    """Drop empty pairs, pairs longer than ``max_words`` and pairs whose length ratio exceeds ``max_ratio``."""
    kept: List[int] = []
    for k, (src, tgt) in enumerate(zip(corpus.source, corpus.target)):
        ls, lt = len(src.split()), len(tgt.split())
        if ls == 0 or lt == 0:
            continue
        if ls > max_words or lt > max_words:
            continue
        if max(ls, lt) / min(ls, lt) > max_ratio:
            continue
        kept.append(k)
    logger.info("Length filter kept %d of %d pairs (max %d words, ratio %.2f)", len(kept), len(corpus), max_words, max_ratio)
    return corpus.subset(kept), kept


# ── Pharaoh format ──


def _parse_link(token: str, number: int, path: Optional[str], one_indexed: bool) -> Tuple[Link, bool]:
    match = re.fullmatch(r"(\d+)([-?])(\d+)", token)
    if not match:
        raise FormatError(f"malformed alignment token {token!r}", number, path)
    j, sep, i = int(match.group(1)), match.group(2), int(match.group(3))
    if one_indexed:
        if j == 0 or i == 0:
            raise FormatError(f"index 0 in one-indexed token {token!r}", number, path)
        j, i = j - 1, i - 1
    return (j, i), sep == "-"


def parse_pharaoh_line(line: str, number: int = 1, path: Optional[str] = None, one_indexed: bool = False) -> GoldAlignment:
    sure: Set[Link] = set()
    possible: Set[Link] = set()
    for token in line.split():
        link, is_sure = _parse_link(token, number, path, one_indexed)
        possible.add(link)
        if is_sure:
            sure.add(link)
    return GoldAlignment(sure=frozenset(sure), possible=frozenset(possible))


def read_pharaoh(path: PathLike, one_indexed: bool = False) -> List[AlignmentSet]:
    """One AlignmentSet per line; ``j?i`` links are read as plain links."""
    return [
        AlignmentSet.of(parse_pharaoh_line(line, n, str(path), one_indexed).possible)
        for n, line in enumerate(read_lines(path), start=1)
    ]


def read_gold(path: PathLike, one_indexed: bool = False) -> List[GoldAlignment]:
    return [parse_pharaoh_line(line, n, str(path), one_indexed) for n, line in enumerate(read_lines(path), start=1)]


def format_alignment(alignment: AlignmentSet) -> str:
    return " ".join(f"{j}-{i}" for j, i in sorted(alignment.links))


def format_gold(gold: GoldAlignment) -> str:
    tokens = [f"{j}-{i}" if (j, i) in gold.sure else f"{j}?{i}" for j, i in sorted(gold.possible)]
    return " ".join(tokens)


def write_pharaoh(path: PathLike, alignments: Iterable[AlignmentSet]) -> None:
    write_lines(path, (format_alignment(a) for a in alignments))


def write_gold(path: PathLike, golds: Iterable[GoldAlignment]) -> None:
    write_lines(path, (format_gold(g) for g in golds))


def read_naacl_gold(path: PathLike, num_sentences: int) -> List[GoldAlignment]:
    """Import "sentence source target [S|P]" lines, all 1-indexed."""
    sure: Dict[int, Set[Link]] = {}
    possible: Dict[int, Set[Link]] = {}
    for number, line in enumerate(read_lines(path), start=1):
        parts = line.split()
        if not parts:
            continue
        if len(parts) < 3 or not all(p.isdigit() for p in parts[:3]):
            raise FormatError(f"expected 'sentence source target [S|P]', got {line!r}", number, str(path))
        sent, j, i = (int(p) for p in parts[:3])
        if not 1 <= sent <= num_sentences or j == 0 or i == 0:
            raise FormatError(f"index out of range in {line!r}", number, str(path))
        tier = parts[3].upper() if len(parts) > 3 else "S"
        if tier not in ("S", "P"):
            raise FormatError(f"unknown link tier {parts[3]!r}", number, str(path))
        link = (j - 1, i - 1)
        possible.setdefault(sent - 1, set()).add(link)
        if tier == "S":
            sure.setdefault(sent - 1, set()).add(link)
    return [
        GoldAlignment(sure=frozenset(sure.get(k, ())), possible=frozenset(possible.get(k, ())))
        for k in range(num_sentences)
    ]


# ── Synthetic permutation corpus ──


def permutation(scheme: str, length: int) -> List[int]:
    """Source position feeding each target position under a local reordering scheme.

    Schemes: ``identity``, ``adjacent-swap`` and ``window-reverse:k``.
    """
    order = list(range(length))
    if scheme == "identity":
        return order
    if scheme == "adjacent-swap":
        for k in range(0, length - 1, 2):
            order[k], order[k + 1] = order[k + 1], order[k]
        return order
    if scheme.startswith("window-reverse"):
        _, _, size = scheme.partition(":")
        window = int(size) if size else 3
        if window < 1:
            raise ParameterError(f"window size must be positive, got {window}")
        return [p for start in range(0, length, window) for p in reversed(order[start : start + window])]
    raise ParameterError(f"unknown permutation scheme {scheme!r}")


def _pseudo_words(rng: np.random.Generator, count: int, alphabet: str, taken: Set[str]) -> List[str]:
    words: List[str] = []
    while len(words) < count:
        length = int(rng.integers(2, 7))
        word = "".join(alphabet[int(c)] for c in rng.integers(0, len(alphabet), size=length))
        if word not in taken:
            taken.add(word)
            words.append(word)
    return words


def generate_synthetic_corpus(
    seed: int,
    size: int,
    vocab: int = 50,
    scheme: str = "adjacent-swap",
    min_len: int = 3,
    max_len: int = 10,
) -> Tuple[ParallelCorpus, List[GoldAlignment]]:
    """Word-for-word lexicon substitution of random source sentences plus a local reordering.

    The gold alignment is the known bijection; every link is sure.
    """
    if vocab < 2:
        raise ParameterError(f"synthetic vocabulary needs at least 2 words, got {vocab}")
    if not 1 <= min_len <= max_len:
        raise ParameterError(f"invalid sentence length range [{min_len}, {max_len}]")
    rng = np.random.default_rng(seed)
    taken: Set[str] = set()
    source_words = _pseudo_words(rng, vocab, "abcdefghijklm", taken)
    target_words = _pseudo_words(rng, vocab, "nopqrstuvwxyz", taken)

    source: List[str] = []
    target: List[str] = []
    golds: List[GoldAlignment] = []
    for _ in range(size):
        length = int(rng.integers(min_len, max_len + 1))
        ids = rng.integers(0, vocab, size=length)
        order = permutation(scheme, length)
        source.append(" ".join(source_words[k] for k in ids))
        target.append(" ".join(target_words[ids[j]] for j in order))
        golds.append(GoldAlignment.all_sure((j, i) for i, j in enumerate(order)))
    return ParallelCorpus(source=source, target=target), golds
