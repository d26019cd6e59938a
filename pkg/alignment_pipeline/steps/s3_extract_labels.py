"""Step 3: Extract alignments. Per-layer baseline scores and training labels."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from ..bpe import project_alignment_to_words
from ..corpus import PreparedCorpus
from ..evaluation import aer
from ..models import AlignmentScore, AlignmentSet, ExperimentConfig
from ..statistical import align_corpus_bidirectional
from ..training import layer_average_labels
from .s1_prepare_corpus import PreparedData
from .s2_train_baseline import DirectionalModels

logger = logging.getLogger(__name__)


@dataclass
class ExtractedAlignments:
    """Word alignments of the baseline and statistical methods on both splits."""

    per_layer: Dict[str, AlignmentScore] = field(default_factory=dict)
    test_layer_average: List[AlignmentSet] = field(default_factory=list)
    self_labels: List[AlignmentSet] = field(default_factory=list)
    statistical_train: List[AlignmentSet] = field(default_factory=list)
    statistical_test: List[AlignmentSet] = field(default_factory=list)


def layer_alignments(
    baseline: DirectionalModels,
    corpus: PreparedCorpus,
    config: ExperimentConfig,
) -> Dict[str, List[AlignmentSet]]:
    """Layer-average alignments for every decoder layer (keys "1", "2", ...) and for "average"."""
    n_layers = baseline.forward.config.n_layers
    scopes = [*range(1, n_layers + 1), "all"]
    out: Dict[str, List[AlignmentSet]] = {}
    for scope in scopes:
        label = "average" if scope == "all" else str(scope)
        out[label] = layer_average_labels(baseline.forward, corpus, baseline.reverse, scope, config.final_and)
    return out


def score_layers(baseline: DirectionalModels, data: PreparedData, config: ExperimentConfig) -> Tuple[Dict[str, AlignmentScore], Dict[str, List[AlignmentSet]]]:
    """Test AER of each decoder layer's averaged attention, plus the all-layer average."""
    alignments = layer_alignments(baseline, data.test, config)
    scores = {label: aer(hyps, data.gold)[0] for label, hyps in alignments.items()}
    for label, score in scores.items():
        logger.info("Layer %s: AER %.4f (P %.4f, R %.4f)", label, score.aer, score.precision, score.recall)
    return scores, alignments


def statistical_alignments(data: PreparedData, config: ExperimentConfig) -> Tuple[List[AlignmentSet], List[AlignmentSet]]:
    """Symmetrized IBM1/HMM word alignments of (train, test).

    The aligner is unsupervised, so it is trained on both splits together. At
    subword level the subword links are projected back onto words.
    """
    splits = [data.train] + ([data.test] if data.test is not None else [])
    pairs = [pair for split in splits for pair in split.pairs]
    if config.aligner.subword_level:
        subword = align_corpus_bidirectional(
            [(src.tokens, tgt.tokens) for src, tgt in pairs], config.aligner, config.final_and
        )
        words = [
            project_alignment_to_words(a, src.word_spans, tgt.word_spans)
            for a, (src, tgt) in zip(subword, pairs)
        ]
    else:
        word_pairs = list(data.train_words.pairs())
        if data.test_words is not None:
            word_pairs += data.test_words.pairs()
        words = align_corpus_bidirectional(word_pairs, config.aligner, config.final_and)
    n_train = len(data.train)
    return words[:n_train], words[n_train:]


def extract_labels(
    baseline: DirectionalModels,
    data: PreparedData,
    config: ExperimentConfig,
    need_self: bool = True,
    need_statistical: bool = True,
) -> ExtractedAlignments:
    """Score baseline layers on the test split and build the supervision labels.

    Args:
        baseline: Baseline models from step 2.
        data: Prepared corpus from step 1.
        config: Resolved experiment configuration.
        need_self: Build layer-average labels of the training split.
        need_statistical: Run the statistical aligner on both splits.

    Returns:
        ExtractedAlignments with per-layer scores and labels.
    """
    logger.info("Step 3: Extracting alignments (self labels: %s, statistical: %s)", need_self, need_statistical)
    result = ExtractedAlignments()

    if data.has_gold:
        result.per_layer, by_layer = score_layers(baseline, data, config)
        result.test_layer_average = by_layer[str(max(1, baseline.forward.config.n_layers - 1))]

    if need_self:
        result.self_labels = layer_average_labels(
            baseline.forward, data.train, baseline.reverse, None, config.final_and
        )
    if need_statistical:
        result.statistical_train, result.statistical_test = statistical_alignments(data, config)

    logger.info(
        "Step 3 complete: %d self-label links, %d statistical links",
        sum(map(len, result.self_labels)), sum(map(len, result.statistical_train)),
    )
    return result


def label_summary(extracted: ExtractedAlignments) -> Dict[str, Optional[float]]:
    def density(labels: List[AlignmentSet]) -> Optional[float]:
        if not labels:
            return None
        return sum(map(len, labels)) / len(labels)

    return {
        "self_links_per_sentence": density(extracted.self_labels),
        "statistical_links_per_sentence": density(extracted.statistical_train),
    }
