"""Step 5: Evaluate. Score every system against gold and test it against the baseline."""

from __future__ import annotations

import logging
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from ..errors import DataError
from ..evaluation import aer, wilcoxon_signed_rank
from ..models import AlignmentScore, AlignmentSet, GoldAlignment, ScoreRow, SignificanceResult

logger = logging.getLogger(__name__)

DEFAULT_ALPHA = 0.001


def score_row(name: str, score: AlignmentScore, p_value: Optional[float] = None, baseline: str = "") -> ScoreRow:
    return ScoreRow(
        model=name,
        aer=score.aer,
        precision=score.precision,
        recall=score.recall,
        hyp_count=score.hyp_count,
        sure_count=score.sure_count,
        possible_count=score.possible_count,
        p_value=p_value,
        baseline=baseline,
    )


def evaluate_systems(
    systems: Mapping[str, Sequence[AlignmentSet]],
    gold: Sequence[GoldAlignment],
    baseline: Optional[str] = None,
    alpha: float = DEFAULT_ALPHA,
) -> Tuple[List[ScoreRow], Dict[str, SignificanceResult]]:
    """Corpus AER of each system, plus a paired signed-rank test of per-sentence AER against ``baseline``.

    Args:
        systems: Test-split word alignments keyed by system name, in report order.
        gold: Gold alignments of the test split.
        baseline: System every other system is compared against; None skips the tests.
        alpha: Significance level.

    Returns:
        (rows in ``systems`` order, significance results keyed by system name).

    Raises:
        DataError: If ``baseline`` is not one of ``systems``.
    """
    logger.info("Step 5: Evaluating %d systems on %d gold sentences", len(systems), len(gold))
    if baseline is not None and baseline not in systems:
        raise DataError(f"baseline system {baseline!r} was not evaluated")

    scored = {name: aer(hyps, gold) for name, hyps in systems.items()}
    baseline_sentences = [s.aer for s in scored[baseline][1]] if baseline is not None else None

    rows: List[ScoreRow] = []
    tests: Dict[str, SignificanceResult] = {}
    for name, (corpus, per_sentence) in scored.items():
        p_value = None
        if baseline_sentences is not None and name != baseline:
            tests[name] = wilcoxon_signed_rank([s.aer for s in per_sentence], baseline_sentences, alpha)
            p_value = tests[name].p_value
        rows.append(score_row(name, corpus, p_value, baseline if p_value is not None else ""))
        logger.info(
            "%s: AER %.4f, precision %.4f, recall %.4f%s",
            name, corpus.aer, corpus.precision, corpus.recall,
            "" if p_value is None else f", p={p_value:.2e} vs {baseline}",
        )
    logger.info("Step 5 complete")
    return rows, tests
