"""End-to-end tests for AlignmentExperiment.

The fast tests run a two-layer model for one epoch on a few dozen synthetic
pairs and check the run directory. The ``slow`` tests train desk-scale models
and check that supervised attention beats the layer-average baseline.
"""

import json
import statistics

import pytest

from alignment_pipeline.config import load_config
from alignment_pipeline.corpus import generate_synthetic_corpus, read_pharaoh
from alignment_pipeline.errors import DataError
from alignment_pipeline.pipeline import BASELINE_SYSTEM, AlignmentExperiment

from .helpers import tiny_config

SYSTEMS = [BASELINE_SYSTEM, "hmm", "multitask", "multitask-full-context", "external"]


def _split(seed: int = 1, train_size: int = 32, test_size: int = 8, **kwargs):
    corpus, golds = generate_synthetic_corpus(seed, train_size + test_size, vocab=10, min_len=2, max_len=5, **kwargs)
    return (
        corpus.subset(range(train_size)),
        corpus.subset(range(train_size, train_size + test_size)),
        golds[train_size:],
    )


class TestAlignmentExperiment:
    def test_full_run_writes_artifacts(self, tmp_path):
        train, test, gold = _split()
        progress = []
        experiment = AlignmentExperiment(
            tiny_config(training={"epochs": 1}),
            output_dir=str(tmp_path / "run"),
            progress_callback=lambda msg, pct: progress.append(pct),
        )
        result = experiment.run(train, test, gold)

        assert [row.model for row in result.rows] == SYSTEMS
        assert result.rows[0].p_value is None
        for row in result.rows[1:]:
            assert row.baseline == BASELINE_SYSTEM
            assert 0.0 <= row.p_value <= 1.0
            assert 0.0 <= row.aer <= 1.0
        assert list(result.per_layer) == ["1", "2", "average"]
        assert set(result.significance) == set(SYSTEMS[1:])
        assert set(result.epochs) == {"baseline", "multitask", "multitask-full-context", "external"}
        assert progress[-1] == 1.0

        run = tmp_path / "run"
        for name in (
            "config.json", "bpe.codes", "vocab.txt", "step1_corpus.json", "step2_baseline_epochs.json",
            "step3_extraction.json", "step4_epochs.json", "step5_scores.json", "manifest.json",
            "labels_self.txt", "labels_statistical.txt", "aer_per_layer.csv", "aer_per_layer.svg",
            "comparison.csv", "scores.tsv", "aer_vs_epoch.csv", "aer_vs_epoch.svg",
        ):
            assert (run / name).exists(), name
        assert (run / "checkpoints" / "baseline_fwd_averaged.alnf").exists()
        for system in SYSTEMS:
            assert len(read_pharaoh(run / "alignments" / f"{system}.txt")) == len(test)
        assert len(read_pharaoh(run / "labels_self.txt")) == len(train)

        manifest = json.loads((run / "manifest.json").read_text(encoding="utf-8"))
        assert manifest["run_info"]["seed"] == 7
        assert [s["model"] for s in manifest["results"]["systems"]] == SYSTEMS
        assert manifest["results"]["epochs_trained"]["baseline"] == 1

    def test_baseline_row_matches_penultimate_layer(self, tmp_path):
        train, test, gold = _split(2)
        result = AlignmentExperiment(
            tiny_config(training={"epochs": 1}, variants=["multitask"]), output_dir=str(tmp_path)
        ).run(train, test, gold)
        baseline = result.rows[0]
        assert baseline.model == BASELINE_SYSTEM
        assert baseline.aer == pytest.approx(result.per_layer["1"].aer)

    def test_without_gold_skips_scoring(self, tmp_path):
        train, _, _ = _split(3)
        result = AlignmentExperiment(
            tiny_config(training={"epochs": 1}, variants=["multitask"]), output_dir=str(tmp_path)
        ).run(train)
        assert result.rows == []
        assert result.per_layer == {}
        assert set(result.epochs) == {"baseline", "multitask"}
        assert not (tmp_path / "step5_scores.json").exists()
        assert (tmp_path / "manifest.json").exists()

    def test_gold_size_mismatch(self, tmp_path):
        train, test, gold = _split(4)
        with pytest.raises(DataError):
            AlignmentExperiment(tiny_config(), output_dir=str(tmp_path)).run(train, test, gold[:-1])

    def test_default_output_dir(self, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        monkeypatch.setenv("ALIGN_OUTPUT_DIR", str(tmp_path / "runs"))
        train, _, _ = _split(5, train_size=12)
        experiment = AlignmentExperiment(tiny_config(training={"epochs": 1}, variants=["multitask"]))
        experiment.run(train)
        assert experiment.output_dir.startswith(str(tmp_path / "runs" / "tiny_"))


def _acceptance_run(config_path, output_dir, seed: int, variants):
    config = load_config(config_path, {"seed": str(seed), "variants": ",".join(variants)})
    corpus, golds = generate_synthetic_corpus(seed, 2200, vocab=50, scheme="adjacent-swap")
    train, test = corpus.subset(range(2000)), corpus.subset(range(2000, 2200))
    result = AlignmentExperiment(config, output_dir=str(output_dir / f"seed{seed}")).run(train, test, golds[2000:])
    return {row.model: row.aer for row in result.rows}


@pytest.mark.slow
class TestAcceptanceOrdering:
    """Median over three seeds of desk-scale runs on the adjacent-swap corpus."""

    @pytest.fixture(scope="class")
    def scores(self, tmp_path_factory, request):
        config_path = request.config.rootpath / "configs" / "synthetic.conf"
        output_dir = tmp_path_factory.mktemp("acceptance")
        variants = ["multitask", "multitask-full-context", "external"]
        runs = [_acceptance_run(config_path, output_dir, seed, variants) for seed in (1, 2, 3)]
        return {system: statistics.median(run[system] for run in runs) for system in runs[0]}

    def test_supervised_attention_beats_baseline(self, scores):
        assert scores["multitask-full-context"] <= scores["multitask"] <= scores[BASELINE_SYSTEM]
        assert scores["multitask-full-context"] <= scores[BASELINE_SYSTEM] - 0.05
        assert scores["multitask-full-context"] <= 0.10

    def test_statistical_labels_transfer(self, scores):
        assert scores["external"] <= scores["multitask-full-context"]
