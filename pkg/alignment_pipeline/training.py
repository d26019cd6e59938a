"""Multi-task training: translation loss plus supervised attention on one head.

The translation loss always comes from the decoder pass with the future mask.
With full target context the alignment loss is taken from a second decoder
pass over the same inputs without that mask; both passes share the encoder
output, so the alignment gradient reaches every parameter.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from tqdm import tqdm

from . import functional as F
from .bpe import expand_alignment_to_subwords
from .checkpoint import average_checkpoints, average_states, save_model
from .corpus import PreparedCorpus
from .errors import DataError
from .export import atomic_write_text
from .extraction import Scope, extract_layer_average, symmetrize_corpus
from .models import AlignmentSet, ExperimentConfig, MultiTaskConfig, TrainMode, TrainingConfig
from .optim import Adam
from .tensor import Tensor, get_default_dtype, no_grad
from .transformer import Batch, Transformer

logger = logging.getLogger(__name__)

ProgressCallback = Callable[[str, float], None]


# ── Labels ──


@dataclass
class AlignmentLabelMatrix:
    """0-1 link matrix G [I, J] and its row-normalized form G^p."""

    links: np.ndarray
    normalized: np.ndarray
    aligned_rows: np.ndarray  # bool [I]

    @property
    def shape(self) -> Tuple[int, int]:
        return self.links.shape


def build_label_matrix(alignment: AlignmentSet, target_len: int, source_len: int) -> AlignmentLabelMatrix:
    links = np.zeros((target_len, source_len))
    for j, i in alignment.links:
        if not (0 <= j < source_len and 0 <= i < target_len):
            raise DataError(f"label link {(j, i)} outside {source_len} source x {target_len} target positions")
        links[i, j] = 1.0
    totals = links.sum(axis=1, keepdims=True)
    normalized = np.divide(links, totals, out=np.zeros_like(links), where=totals > 0)
    return AlignmentLabelMatrix(links=links, normalized=normalized, aligned_rows=totals[:, 0] > 0)


def alignment_loss(attention: Tensor, labels: AlignmentLabelMatrix) -> Tensor:
    """-(1/I) Σ_i Σ_j G^p[i, j] log A[i, j]; unaligned rows contribute nothing."""
    return F.attention_cross_entropy(attention, labels.normalized, normalizer=labels.shape[0])


def combine_losses(translation: Tensor, alignment: Optional[Tensor], align_lambda: float) -> Tensor:
    if alignment is None or align_lambda == 0:
        return translation
    return translation + alignment * align_lambda


def batch_label_tensor(batch: Batch, labels: Sequence[Optional[AlignmentLabelMatrix]]) -> np.ndarray:
    """Stack per-sentence G^p into [B, T, S]; ⟨eos⟩ and padding rows/columns stay zero."""
    out = np.zeros((batch.size, batch.tgt_in.shape[1], batch.src.shape[1]), dtype=get_default_dtype())
    for row, label in enumerate(labels):
        if label is not None:
            rows, cols = label.shape
            out[row, :rows, :cols] = label.normalized
    return out


# ── One step ──


@dataclass
class LossBreakdown:
    translation: Tensor
    alignment: Optional[Tensor]
    total: Tensor

    def values(self) -> Dict[str, float]:
        return {
            "L_t": self.translation.item(),
            "L_a": self.alignment.item() if self.alignment is not None else 0.0,
            "L": self.total.item(),
        }


def compute_multitask_loss(
    model: Transformer,
    batch: Batch,
    labels: Optional[np.ndarray],
    multitask: MultiTaskConfig,
    label_smoothing: float = 0.1,
    rng: Optional[np.random.Generator] = None,
) -> LossBreakdown:
    """L = L_t + λ L_a over one batch; ``labels`` is the stacked [B, T, S] G^p or None."""
    enc = model.encode(batch.src, batch.src_lengths, rng)
    masked = model.decode(batch.tgt_in, enc, batch.tgt_lengths, causal=True, rng=rng)
    translation = F.cross_entropy_label_smoothed(masked.logits, batch.tgt_out, label_smoothing, valid=batch.tgt_valid)
    if multitask.align_lambda == 0 or labels is None or not np.any(labels):
        return LossBreakdown(translation, None, translation)

    layer = multitask.resolved_layer(model.config.n_layers)
    head_index = multitask.resolved_head(model.config.n_heads) - 1
    if multitask.full_context:
        attention = model.decode(batch.tgt_in, enc, batch.tgt_lengths, causal=False, rng=rng).attention
    else:
        attention = masked.attention
    head = attention[layer - 1][:, head_index]
    # ⟨eos⟩ rows carry no labels and are not counted
    alignment = F.attention_cross_entropy(head, labels, normalizer=int((batch.tgt_lengths - 1).sum()))
    return LossBreakdown(translation, alignment, combine_losses(translation, alignment, multitask.align_lambda))


def multitask_step(
    model: Transformer,
    optimizer: Adam,
    batch: Batch,
    labels: Optional[np.ndarray],
    multitask: MultiTaskConfig,
    label_smoothing: float = 0.1,
    rng: Optional[np.random.Generator] = None,
) -> Dict[str, float]:
    """Forward, backward and one Adam update; returns L_t, L_a, L and the learning rate used."""
    optimizer.zero_grad()
    losses = compute_multitask_loss(model, batch, labels, multitask, label_smoothing, rng)
    losses.total.backward()
    lr = optimizer.step()
    return {**losses.values(), "lr": lr}


# ── Batching ──


def make_batches(target_lengths: Sequence[int], max_tokens: int, rng: Optional[np.random.Generator] = None) -> List[List[int]]:
    """Group sentence indices so each batch holds at most ``max_tokens`` target tokens (⟨eos⟩ included).

    A single sentence longer than the budget forms its own batch.
    """
    order = np.arange(len(target_lengths))
    if rng is not None:
        order = rng.permutation(order)
    batches: List[List[int]] = []
    current: List[int] = []
    tokens = 0
    for k in order:
        size = int(target_lengths[k]) + 1
        if current and tokens + size > max_tokens:
            batches.append(current)
            current, tokens = [], 0
        current.append(int(k))
        tokens += size
    if current:
        batches.append(current)
    return batches


# ── Trainer ──


@dataclass
class TrainingData:
    sources: List[List[int]]
    targets: List[List[int]]
    labels: Optional[List[Optional[AlignmentSet]]] = None  # subword level

    def __post_init__(self) -> None:
        if len(self.sources) != len(self.targets):
            raise DataError(f"{len(self.sources)} source but {len(self.targets)} target sentences")
        if self.labels is not None and len(self.labels) != len(self.sources):
            raise DataError(f"{len(self.labels)} label lines for {len(self.sources)} sentences")

    def __len__(self) -> int:
        return len(self.sources)

    def batch(self, indices: Sequence[int]) -> Batch:
        return Batch.from_pairs([self.sources[k] for k in indices], [self.targets[k] for k in indices], indices)


@dataclass
class EpochRecord:
    epoch: int
    steps: int
    train_loss: float
    valid_loss: Optional[float] = None
    valid_aer: Optional[float] = None
    checkpoint: Optional[str] = None


@dataclass
class TrainingResult:
    epochs: List[EpochRecord] = field(default_factory=list)
    steps: int = 0
    stopped_early: bool = False
    log_lines: List[str] = field(default_factory=list)

    @property
    def best_valid_loss(self) -> Optional[float]:
        losses = [e.valid_loss for e in self.epochs if e.valid_loss is not None]
        return min(losses) if losses else None


def label_statistics(labels: Sequence[Optional[AlignmentLabelMatrix]]) -> Tuple[int, int, int]:
    """(labeled sentences, aligned rows, total rows)."""
    labeled = aligned = total = 0
    for label in labels:
        if label is None:
            continue
        labeled += 1
        aligned += int(label.aligned_rows.sum())
        total += label.shape[0]
    return labeled, aligned, total


class Trainer:
    """Epoch loop with token-budget batches, early stopping and checkpoint averaging."""

    def __init__(
        self,
        model: Transformer,
        training: TrainingConfig,
        multitask: MultiTaskConfig,
        seed: int = 1,
        checkpoint_dir: Optional[Union[str, Path]] = None,
        name: str = "model",
        show_progress: bool = False,
    ):
        self.model = model
        self.training = training
        self.multitask = multitask
        self.seed = seed
        self.checkpoint_dir = Path(checkpoint_dir) if checkpoint_dir is not None else None
        self.name = name
        self.show_progress = show_progress
        self.optimizer = Adam(
            model.named_parameters(),
            lr=training.lr,
            warmup_steps=training.warmup_steps,
            betas=(training.beta1, training.beta2),
            clip_norm=training.clip_norm,
        )

    def _labels(self, data: TrainingData) -> List[Optional[AlignmentLabelMatrix]]:
        if data.labels is None or self.multitask.align_lambda == 0:
            return [None] * len(data)
        return [
            None if alignment is None else build_label_matrix(alignment, len(tgt), len(src))
            for alignment, src, tgt in zip(data.labels, data.sources, data.targets)
        ]

    def validation_loss(self, data: TrainingData) -> float:
        """Token-weighted translation NLL (no smoothing) in evaluation mode."""
        self.model.eval()
        total = weight = 0.0
        try:
            with no_grad():
                for indices in make_batches([len(t) for t in data.targets], self.training.max_tokens):
                    batch = data.batch(indices)
                    out = self.model.forward(batch, causal=True)
                    loss = F.cross_entropy_label_smoothed(out.logits, batch.tgt_out, 0.0, valid=batch.tgt_valid)
                    total += loss.item() * batch.num_target_tokens
                    weight += batch.num_target_tokens
        finally:
            self.model.train()
        return total / weight

    def fit(
        self,
        train: TrainingData,
        valid: Optional[TrainingData] = None,
        evaluate_aer: Optional[Callable[[Transformer], float]] = None,
        progress_callback: Optional[ProgressCallback] = None,
    ) -> TrainingResult:
        if len(train) == 0:
            raise DataError("cannot train on an empty corpus")
        cfg = self.training
        logger.info(
            "Training %s: %d sentences, %d parameters, training=%s, multitask=%s",
            self.name, len(train), self.model.num_parameters(),
            cfg.model_dump(), self.multitask.model_dump(),
        )
        labels = self._labels(train)
        labeled, aligned, rows = label_statistics(labels)
        if labeled:
            logger.info(
                "Labels: %d/%d sentences, %d/%d target rows aligned (%.1f%%)",
                labeled, len(train), aligned, rows, 100.0 * aligned / max(1, rows),
            )

        rng = np.random.default_rng(self.seed)
        lengths = [len(t) for t in train.targets]
        result = TrainingResult()
        recent_states: List[Dict[str, np.ndarray]] = []
        checkpoints: List[str] = []
        best = float("inf")
        stale = 0
        self.model.train()

        for epoch in range(1, cfg.epochs + 1):
            batches = make_batches(lengths, cfg.max_tokens, rng)
            epoch_loss = 0.0
            bar = tqdm(batches, desc=f"{self.name} epoch {epoch}", disable=not self.show_progress)
            for indices in bar:
                batch = train.batch(indices)
                stacked = batch_label_tensor(batch, [labels[k] for k in indices]) if labeled else None
                values = multitask_step(self.model, self.optimizer, batch, stacked, self.multitask, cfg.label_smoothing, rng)
                result.steps += 1
                epoch_loss += values["L"]
                result.log_lines.append(
                    f"{result.steps}\t{values['L_t']:.6f}\t{values['L_a']:.6f}\t{values['L']:.6f}\t{values['lr']:.8f}\n"
                )
            record = EpochRecord(epoch=epoch, steps=result.steps, train_loss=epoch_loss / len(batches))

            if valid is not None and len(valid):
                record.valid_loss = self.validation_loss(valid)
            if evaluate_aer is not None:
                record.valid_aer = evaluate_aer(self.model)
                self.model.train()
            if self.checkpoint_dir is not None:
                path = self.checkpoint_dir / f"{self.name}_epoch{epoch:03d}.alnf"
                save_model(self.model, path, self.seed, {"multitask": self.multitask.model_dump()})
                atomic_write_text(self.checkpoint_dir / f"{self.name}_train_log.tsv", "".join(result.log_lines))
                checkpoints.append(str(path))
                record.checkpoint = str(path)
            else:
                recent_states.append({k: v.copy() for k, v in self.model.state_dict().items()})
                recent_states = recent_states[-cfg.average_last :]
            result.epochs.append(record)
            logger.info(
                "%s epoch %d: train loss %.4f, valid loss %s, valid AER %s",
                self.name, epoch, record.train_loss,
                "n/a" if record.valid_loss is None else f"{record.valid_loss:.4f}",
                "n/a" if record.valid_aer is None else f"{record.valid_aer:.4f}",
            )
            if progress_callback:
                progress_callback(f"{self.name}: epoch {epoch}/{cfg.epochs}", epoch / cfg.epochs)

            if record.valid_loss is not None:
                if record.valid_loss < best:
                    best, stale = record.valid_loss, 0
                else:
                    stale += 1
                    if stale >= cfg.patience:
                        logger.info("Early stopping %s after epoch %d (patience %d)", self.name, epoch, cfg.patience)
                        result.stopped_early = True
                        break

        if checkpoints:
            averaged = average_checkpoints(checkpoints, cfg.average_last)
            self.model.load_state_dict(averaged.state_dict())
            save_model(self.model, self.checkpoint_dir / f"{self.name}_averaged.alnf", self.seed, {"multitask": self.multitask.model_dump()})
        elif recent_states:
            self.model.load_state_dict(average_states(recent_states))
        return result


# ── Pipelines ──


def split_validation(size: int, fraction: float, seed: int) -> Tuple[List[int], List[int]]:
    """Random (train, validation) index split; validation is empty when ``fraction`` is 0 or the corpus tiny."""
    n_valid = int(round(size * fraction))
    if n_valid == 0 or n_valid >= size:
        return list(range(size)), []
    order = np.random.default_rng(seed).permutation(size)
    return sorted(int(k) for k in order[n_valid:]), sorted(int(k) for k in order[:n_valid])


def subword_labels(data: PreparedCorpus, word_alignments: Sequence[Optional[AlignmentSet]]) -> List[Optional[AlignmentSet]]:
    """Expand word links so every subword pair of an aligned word pair is linked."""
    if len(word_alignments) != len(data):
        raise DataError(f"{len(word_alignments)} alignment lines for {len(data)} sentence pairs")
    out: List[Optional[AlignmentSet]] = []
    for alignment, (src, tgt) in zip(word_alignments, data.pairs):
        if alignment is None or not alignment.links:
            out.append(None)
        else:
            out.append(expand_alignment_to_subwords(alignment, src.word_spans, tgt.word_spans))
    return out


def train_model(
    data: PreparedCorpus,
    config: ExperimentConfig,
    mode: TrainMode = "baseline-nll",
    word_labels: Optional[Sequence[Optional[AlignmentSet]]] = None,
    checkpoint_dir: Optional[Union[str, Path]] = None,
    name: str = "model",
    evaluate_aer: Optional[Callable[[Transformer], float]] = None,
    progress_callback: Optional[ProgressCallback] = None,
) -> Tuple[Transformer, TrainingResult]:
    """Train a fresh model on ``data`` in the given mode; labels are word-level alignments."""
    if len(data) == 0:
        raise DataError("cannot train on an empty corpus")
    multitask = MultiTaskConfig.for_mode(mode, **config.multitask.model_dump(exclude={"full_context"}))
    if mode == "baseline-nll":
        word_labels = None
    elif word_labels is None:
        raise DataError(f"training mode {mode!r} needs alignment labels")

    sources, targets = data.ids()
    labels = subword_labels(data, word_labels) if word_labels is not None else None
    train_idx, valid_idx = split_validation(len(data), config.training.validation_fraction, config.seed)
    train = TrainingData(
        [sources[k] for k in train_idx],
        [targets[k] for k in train_idx],
        [labels[k] for k in train_idx] if labels is not None else None,
    )
    valid = TrainingData([sources[k] for k in valid_idx], [targets[k] for k in valid_idx]) if valid_idx else None

    model = Transformer(config.model, len(data.vocab), seed=config.seed)
    trainer = Trainer(model, config.training, multitask, config.seed, checkpoint_dir, name)
    result = trainer.fit(train, valid, evaluate_aer, progress_callback)
    return model, result


def layer_average_labels(
    forward_model: Transformer,
    data: PreparedCorpus,
    reverse_model: Optional[Transformer] = None,
    layer: Optional[Scope] = None,
    final_step: bool = False,
) -> List[AlignmentSet]:
    """Word alignments of the layer-average method, symmetrized when a reverse model is given.

    ``layer`` is a 1-based decoder layer or "all"; it defaults to the penultimate layer.
    """
    layer = layer if layer is not None else max(1, forward_model.config.n_layers - 1)
    forward = extract_layer_average(forward_model, data.vocab, data.pairs, layer)
    if reverse_model is None:
        return forward
    reverse = extract_layer_average(reverse_model, data.vocab, data.swapped().pairs, layer)
    return symmetrize_corpus(forward, reverse, final_step)


def self_training_pipeline(
    data: PreparedCorpus,
    config: ExperimentConfig,
    mode: TrainMode = "multitask-full-context",
    base_models: Optional[Tuple[Transformer, Optional[Transformer]]] = None,
    checkpoint_dir: Optional[Union[str, Path]] = None,
) -> Tuple[Transformer, List[AlignmentSet]]:
    """Train baseline model(s), label the corpus with their layer-average alignments, retrain multi-task.

    Returns the multi-task model and the labels it was trained on.
    """
    if len(data) == 0:
        raise DataError("cannot self-train on an empty corpus")
    if base_models is None:
        forward, _ = train_model(data, config, "baseline-nll", checkpoint_dir=checkpoint_dir, name="baseline_fwd")
        reverse = None
        if config.bidirectional:
            reverse, _ = train_model(data.swapped(), config, "baseline-nll", checkpoint_dir=checkpoint_dir, name="baseline_rev")
        base_models = (forward, reverse)
    labels = layer_average_labels(base_models[0], data, base_models[1], final_step=config.final_and)
    model, _ = train_model(data, config, mode, labels, checkpoint_dir=checkpoint_dir, name="selftrain")
    return model, labels


def supervise_from_external(
    data: PreparedCorpus,
    alignments: Sequence[AlignmentSet],
    config: ExperimentConfig,
    mode: TrainMode = "multitask-full-context",
    checkpoint_dir: Optional[Union[str, Path]] = None,
) -> Transformer:
    """Multi-task training on word alignments from another aligner, one line per sentence pair."""
    if len(alignments) != len(data):
        raise DataError(f"alignment file has {len(alignments)} lines but the corpus has {len(data)} sentence pairs")
    model, _ = train_model(data, config, mode, list(alignments), checkpoint_dir=checkpoint_dir, name="external")
    return model
