"""Step 4: Train multi-task models with supervised alignment attention."""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

from ..corpus import PreparedCorpus
from ..errors import DataError
from ..extraction import extract_alignment_head, symmetrize_corpus
from ..models import AlignmentSet, ExperimentConfig, MultiTaskConfig, TrainMode, Variant
from ..training import ProgressCallback
from .s1_prepare_corpus import PreparedData
from .s2_train_baseline import DirectionalModels, train_directional
from .s3_extract_labels import ExtractedAlignments

logger = logging.getLogger(__name__)

VARIANT_MODES: Dict[str, Tuple[TrainMode, str]] = {
    "multitask": ("multitask", "self"),
    "multitask-full-context": ("multitask-full-context", "self"),
    "external": ("multitask-full-context", "external"),
}


def head_alignments(
    models: DirectionalModels,
    corpus: PreparedCorpus,
    config: ExperimentConfig,
) -> List[AlignmentSet]:
    """Word alignments read off the supervised head, symmetrized when a reverse model exists."""
    multitask = MultiTaskConfig.for_mode(models.mode, **config.multitask.model_dump(exclude={"full_context"}))
    max_tokens = config.training.max_tokens
    forward = extract_alignment_head(models.forward, corpus.vocab, corpus.pairs, multitask, max_tokens)
    if models.reverse is None:
        return forward
    reverse = extract_alignment_head(models.reverse, corpus.vocab, corpus.swapped().pairs, multitask, max_tokens)
    return symmetrize_corpus(forward, reverse, config.final_and)


def labels_for(variant: str, extracted: ExtractedAlignments) -> Sequence[AlignmentSet]:
    _, supervision = VARIANT_MODES[variant]
    labels = extracted.statistical_train if supervision == "external" else extracted.self_labels
    if not labels:
        raise DataError(f"variant {variant!r} needs {supervision} alignment labels but none were extracted")
    return labels


def train_multitask(
    data: PreparedData,
    config: ExperimentConfig,
    extracted: ExtractedAlignments,
    variants: Optional[Sequence[Variant]] = None,
    checkpoint_dir: Optional[Union[str, Path]] = None,
    progress_callback: Optional[ProgressCallback] = None,
) -> Dict[str, DirectionalModels]:
    """Train one multi-task model (pair) per variant.

    "multitask" and "multitask-full-context" learn from the baseline's own
    layer-average labels; "external" learns from the statistical aligner's
    labels with full target context.

    Args:
        data: Prepared corpus from step 1.
        config: Resolved experiment configuration.
        extracted: Labels from step 3.
        variants: Variants to train; defaults to ``config.variants``.
        checkpoint_dir: Where per-epoch checkpoints go.
        progress_callback: Receives (message, fraction) per epoch.

    Returns:
        Trained models keyed by variant name.
    """
    variants = list(variants if variants is not None else config.variants)
    logger.info("Step 4: Training multi-task variants %s", ", ".join(variants))
    trained: Dict[str, DirectionalModels] = {}
    for variant in variants:
        mode, _ = VARIANT_MODES[variant]
        trained[variant] = train_directional(
            data,
            config,
            mode,
            variant.replace("-", "_"),
            labels_for(variant, extracted),
            checkpoint_dir,
            progress_callback,
        )
    logger.info("Step 4 complete: %d variants trained", len(trained))
    return trained
