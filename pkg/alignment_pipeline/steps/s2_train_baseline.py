"""Step 2: Train baseline translation models in both directions."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Union

from ..evaluation import aer
from ..extraction import extract_alignment_head, extract_layer_average
from ..models import AlignmentSet, ExperimentConfig, MultiTaskConfig, TrainMode
from ..training import ProgressCallback, TrainingResult, train_model
from ..transformer import Transformer
from .s1_prepare_corpus import PreparedData

logger = logging.getLogger(__name__)


@dataclass
class DirectionalModels:
    """A source→target model, its optional target→source twin and their training histories."""

    name: str
    mode: TrainMode
    forward: Transformer
    reverse: Optional[Transformer] = None
    results: Dict[str, TrainingResult] = field(default_factory=dict)

    def epoch_series(self) -> List[Dict[str, Optional[float]]]:
        """Per-epoch losses and AER of the forward model."""
        result = self.results.get("forward")
        if result is None:
            return []
        return [
            {"epoch": r.epoch, "train_loss": r.train_loss, "valid_loss": r.valid_loss, "valid_aer": r.valid_aer}
            for r in result.epochs
        ]


def aer_monitor(data: PreparedData, config: ExperimentConfig, mode: TrainMode) -> Optional[Callable[[Transformer], float]]:
    """Per-epoch test AER of a forward model, read the way its training mode is meant to be read.

    Returns None when there is no gold to score against.
    """
    if not data.has_gold:
        return None
    max_tokens = config.training.max_tokens
    multitask = MultiTaskConfig.for_mode(mode, **config.multitask.model_dump(exclude={"full_context"}))

    def evaluate(model: Transformer) -> float:
        if mode == "baseline-nll":
            layer = max(1, model.config.n_layers - 1)
            hyps = extract_layer_average(model, data.vocab, data.test.pairs, layer, max_tokens)
        else:
            hyps = extract_alignment_head(model, data.vocab, data.test.pairs, multitask, max_tokens)
        return aer(hyps, data.gold)[0].aer

    return evaluate


def train_directional(
    data: PreparedData,
    config: ExperimentConfig,
    mode: TrainMode,
    name: str,
    labels: Optional[Sequence[Optional[AlignmentSet]]] = None,
    checkpoint_dir: Optional[Union[str, Path]] = None,
    progress_callback: Optional[ProgressCallback] = None,
) -> DirectionalModels:
    """Train the forward model and, when bidirectional, the reverse model on transposed labels.

    Args:
        data: Prepared corpus from step 1.
        config: Resolved experiment configuration.
        mode: Training mode for both directions.
        name: Prefix for checkpoint and log file names.
        labels: Word alignments of the training pairs in (source, target) orientation.
        checkpoint_dir: Where per-epoch checkpoints go; None keeps averaging in memory.
        progress_callback: Receives (message, fraction) per epoch.

    Returns:
        DirectionalModels holding the trained model(s) and their histories.
    """
    forward, forward_result = train_model(
        data.train,
        config,
        mode,
        labels,
        checkpoint_dir=checkpoint_dir,
        name=f"{name}_fwd",
        evaluate_aer=aer_monitor(data, config, mode),
        progress_callback=progress_callback,
    )
    models = DirectionalModels(name=name, mode=mode, forward=forward, results={"forward": forward_result})
    if config.bidirectional:
        reverse_labels = [None if a is None else a.transpose() for a in labels] if labels is not None else None
        models.reverse, models.results["reverse"] = train_model(
            data.train.swapped(),
            config,
            mode,
            reverse_labels,
            checkpoint_dir=checkpoint_dir,
            name=f"{name}_rev",
            progress_callback=progress_callback,
        )
    return models


def train_baseline(
    data: PreparedData,
    config: ExperimentConfig,
    checkpoint_dir: Optional[Union[str, Path]] = None,
    progress_callback: Optional[ProgressCallback] = None,
) -> DirectionalModels:
    """Train translation-only models; their attention feeds the layer-average baseline.

    Args:
        data: Prepared corpus from step 1.
        config: Resolved experiment configuration.
        checkpoint_dir: Where per-epoch checkpoints go.
        progress_callback: Receives (message, fraction) per epoch.

    Returns:
        DirectionalModels for the baseline.
    """
    logger.info("Step 2: Training baseline (%s)", "bidirectional" if config.bidirectional else "forward only")
    models = train_directional(data, config, "baseline-nll", "baseline", None, checkpoint_dir, progress_callback)
    logger.info(
        "Step 2 complete: %d forward epochs%s",
        len(models.results["forward"].epochs),
        f", {len(models.results['reverse'].epochs)} reverse epochs" if "reverse" in models.results else "",
    )
    return models
