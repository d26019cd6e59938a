"""Step 1: Prepare corpus. Filter, learn joint BPE, segment and index both splits."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any, Dict, List, Optional

from ..bpe import BpeEncoder, BpeModel, Vocabulary, learn_joint_bpe
from ..corpus import ParallelCorpus, PreparedCorpus, filter_corpus
from ..errors import DataError
from ..models import ExperimentConfig, GoldAlignment

logger = logging.getLogger(__name__)


@dataclass
class PreparedData:
    """Training and test splits in word and subword form, sharing one vocabulary."""

    bpe: BpeModel
    vocab: Vocabulary
    train_words: ParallelCorpus
    train: PreparedCorpus
    test_words: Optional[ParallelCorpus] = None
    test: Optional[PreparedCorpus] = None
    gold: Optional[List[GoldAlignment]] = None

    @property
    def has_gold(self) -> bool:
        return self.test is not None and self.gold is not None

    def summary(self) -> Dict[str, Any]:
        return {
            "train_pairs": len(self.train),
            "test_pairs": len(self.test) if self.test is not None else 0,
            "gold_sentences": len(self.gold) if self.gold is not None else 0,
            "merges": self.bpe.num_merges,
            "vocab_size": len(self.vocab),
            "train_source_subwords": sum(len(src) for src, _ in self.train.pairs),
            "train_target_subwords": sum(len(tgt) for _, tgt in self.train.pairs),
        }


def prepare_corpus(
    train: ParallelCorpus,
    config: ExperimentConfig,
    test: Optional[ParallelCorpus] = None,
    gold: Optional[List[GoldAlignment]] = None,
) -> PreparedData:
    """Filter the training corpus, learn joint BPE on it and segment both splits.

    The test split is never filtered, since its lines must stay parallel to
    the gold file. The vocabulary covers the subwords of both splits.

    Args:
        train: Word-level training corpus.
        config: Resolved experiment configuration.
        test: Optional word-level test corpus.
        gold: Optional gold alignments, one per test sentence pair.

    Returns:
        PreparedData with segmented splits and the shared vocabulary.

    Raises:
        DataError: If filtering empties the corpus or gold and test disagree in size.
    """
    logger.info("Step 1: Preparing corpus (%d training pairs)", len(train))
    if gold is not None and (test is None or len(gold) != len(test)):
        raise DataError(
            f"gold file has {len(gold)} sentences but the test corpus has {len(test) if test is not None else 0}"
        )

    filtered, kept = filter_corpus(train, config.filter.max_words, config.filter.max_ratio)
    if len(filtered) == 0:
        raise DataError("no training pairs survive length filtering")
    logger.info("Kept %d of %d training pairs after length filtering", len(kept), len(train))

    bpe = learn_joint_bpe(filtered.source, filtered.target, config.bpe.merges, config.bpe.marker)
    encoder = BpeEncoder(bpe)

    def segment(corpus: ParallelCorpus):
        return [(encoder.encode(s), encoder.encode(t)) for s, t in zip(corpus.source, corpus.target)]

    train_pairs = segment(filtered)
    test_pairs = segment(test) if test is not None else []
    vocab = Vocabulary.build(sent.tokens for pair in train_pairs + test_pairs for sent in pair)

    data = PreparedData(
        bpe=bpe,
        vocab=vocab,
        train_words=filtered,
        train=PreparedCorpus(train_pairs, vocab),
        test_words=test,
        test=PreparedCorpus(test_pairs, vocab) if test is not None else None,
        gold=gold,
    )
    logger.info("Step 1 complete: %s", data.summary())
    return data
