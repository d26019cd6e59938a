"""Word alignment from transformer attention, with supervised alignment heads and a statistical baseline."""

from .config import load_config
from .corpus import ParallelCorpus, PreparedCorpus, generate_synthetic_corpus, load_parallel_corpus
from .models import AlignmentSet, ExperimentConfig, ExperimentResult, GoldAlignment
from .pipeline import AlignmentExperiment
from .export import create_output_dir

__all__ = [
    "AlignmentExperiment",
    "load_config",
    "ExperimentConfig",
    "ExperimentResult",
    "AlignmentSet",
    "GoldAlignment",
    "ParallelCorpus",
    "PreparedCorpus",
    "generate_synthetic_corpus",
    "load_parallel_corpus",
    "create_output_dir",
]
