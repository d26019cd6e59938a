"""End-to-end alignment experiment, run as explicit sequential steps."""

from __future__ import annotations

import json
import logging
import os
import time
from datetime import datetime
from typing import Callable, Dict, List, Optional

from .bpe import save_merges
from .config import default_output_base, save_config
from .corpus import ParallelCorpus, write_pharaoh
from .export import atomic_write_text, create_output_dir, save_intermediate
from .models import AlignmentSet, ExperimentConfig, ExperimentResult, GoldAlignment
from .report import emit_reports
from .steps.s1_prepare_corpus import prepare_corpus
from .steps.s2_train_baseline import train_baseline
from .steps.s3_extract_labels import extract_labels, label_summary
from .steps.s4_train_multitask import VARIANT_MODES, head_alignments, train_multitask
from .steps.s5_evaluate import evaluate_systems

logger = logging.getLogger(__name__)

BASELINE_SYSTEM = "layer-average"


class AlignmentExperiment:
    """Baseline → layer-average labels → multi-task variants → scores and reports.

    Each step runs to completion and hands its results to the next. Step
    artifacts are saved to the run directory as soon as they exist, so a run
    that fails midway still leaves its earlier results behind.

    Usage:
        experiment = AlignmentExperiment(load_config("toy.conf"))
        result = experiment.run(train_corpus, test_corpus, gold)
    """

    def __init__(
        self,
        config: ExperimentConfig,
        output_dir: Optional[str] = None,
        progress_callback: Optional[Callable[[str, float], None]] = None,
    ):
        self.config = config
        self.progress_callback = progress_callback or (lambda msg, pct: None)
        self._output_dir = output_dir

    @property
    def output_dir(self) -> Optional[str]:
        return self._output_dir

    def _scaled(self, start: float, end: float) -> Callable[[str, float], None]:
        return lambda msg, frac: self.progress_callback(msg, start + (end - start) * frac)

    def run(
        self,
        train: ParallelCorpus,
        test: Optional[ParallelCorpus] = None,
        gold: Optional[List[GoldAlignment]] = None,
    ) -> ExperimentResult:
        """Execute the five experiment steps.

        Args:
            train: Word-level training corpus.
            test: Word-level test corpus; scoring needs it together with ``gold``.
            gold: Gold alignments of ``test``.

        Returns:
            ExperimentResult with score rows, per-layer scores and epoch series.

        Raises:
            DataError: If the corpus is unusable or gold and test disagree.
        """
        config = self.config
        start_time = time.time()
        run_timestamp = datetime.now().isoformat()

        if not self._output_dir:
            self._output_dir = create_output_dir(config.name, default_output_base())
        else:
            os.makedirs(self._output_dir, exist_ok=True)
        checkpoint_dir = os.path.join(self._output_dir, "checkpoints")
        logger.info("Experiment %s with config %s", config.name, config.model_dump())
        save_config(config, self._output_dir)

        # ── Step 1: Prepare corpus ──
        self.progress_callback("Preparing corpus...", 0.02)
        data = prepare_corpus(train, config, test, gold)
        save_merges(data.bpe, os.path.join(self._output_dir, "bpe.codes"))
        data.vocab.save(os.path.join(self._output_dir, "vocab.txt"))
        save_intermediate(data.summary(), "step1_corpus.json", self._output_dir)
        self.progress_callback(f"Corpus ready: {len(data.train)} pairs, {len(data.vocab)} symbols", 0.05)

        # ── Step 2: Baseline ──
        baseline = train_baseline(data, config, checkpoint_dir, self._scaled(0.05, 0.35))
        epochs: Dict[str, List[Dict[str, Optional[float]]]] = {"baseline": baseline.epoch_series()}
        save_intermediate(epochs, "step2_baseline_epochs.json", self._output_dir)

        # ── Step 3: Alignment extraction ──
        self.progress_callback("Extracting alignments...", 0.36)
        sources = {VARIANT_MODES[v][1] for v in config.variants}
        extracted = extract_labels(
            baseline, data, config, need_self="self" in sources, need_statistical="external" in sources or data.has_gold
        )
        save_intermediate(
            {"per_layer": {k: v.model_dump() for k, v in extracted.per_layer.items()}, **label_summary(extracted)},
            "step3_extraction.json",
            self._output_dir,
        )
        if extracted.self_labels:
            write_pharaoh(os.path.join(self._output_dir, "labels_self.txt"), extracted.self_labels)
        if extracted.statistical_train:
            write_pharaoh(os.path.join(self._output_dir, "labels_statistical.txt"), extracted.statistical_train)
        self.progress_callback("Alignment labels ready", 0.40)

        # ── Step 4: Multi-task variants ──
        trained = train_multitask(data, config, extracted, None, checkpoint_dir, self._scaled(0.40, 0.90))
        for variant, models in trained.items():
            epochs[variant] = models.epoch_series()
        save_intermediate(epochs, "step4_epochs.json", self._output_dir)

        # ── Step 5: Evaluate ──
        result = ExperimentResult(name=config.name, output_dir=self._output_dir, epochs=epochs)
        if data.has_gold:
            self.progress_callback("Scoring systems...", 0.92)
            systems: Dict[str, List[AlignmentSet]] = {
                BASELINE_SYSTEM: extracted.test_layer_average,
                config.aligner.model: extracted.statistical_test,
            }
            for variant, models in trained.items():
                systems[variant] = head_alignments(models, data.test, config)
            for name, alignments in systems.items():
                write_pharaoh(os.path.join(self._output_dir, "alignments", f"{name}.txt"), alignments)
            result.rows, result.significance = evaluate_systems(systems, data.gold, BASELINE_SYSTEM)
            result.per_layer = extracted.per_layer
            save_intermediate(result.rows, "step5_scores.json", self._output_dir)
        else:
            logger.warning("No gold alignments given; skipping evaluation")

        emit_reports(self._output_dir, result.per_layer, result.rows, epochs)

        result.elapsed_seconds = round(time.time() - start_time, 1)
        self._save_manifest(result, run_timestamp)
        self.progress_callback(f"Experiment complete ({result.elapsed_seconds:.0f}s)", 1.0)
        logger.info("Pipeline complete: %d systems scored in %.0fs → %s", len(result.rows), result.elapsed_seconds, self._output_dir)
        return result

    def _save_manifest(self, result: ExperimentResult, timestamp: str) -> None:
        """Save a human-readable run manifest summarizing the experiment."""
        manifest = {
            "run_info": {
                "name": result.name,
                "timestamp": timestamp,
                "seed": self.config.seed,
                "elapsed_seconds": result.elapsed_seconds,
                "output_dir": self._output_dir,
            },
            "results": {
                "systems": [{"model": r.model, "aer": round(r.aer, 4), "p_value": r.p_value} for r in result.rows],
                "per_layer": {k: round(v.aer, 4) for k, v in result.per_layer.items()},
                "epochs_trained": {k: len(v) for k, v in result.epochs.items()},
            },
            "files_in_directory": sorted(f for f in os.listdir(self._output_dir) if not f.startswith(".")),
        }
        manifest_path = os.path.join(self._output_dir, "manifest.json")
        atomic_write_text(manifest_path, json.dumps(manifest, indent=2, default=str))
        logger.info("Saved run manifest to %s", manifest_path)
