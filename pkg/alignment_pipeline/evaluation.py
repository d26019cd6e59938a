"""Alignment error rate, corpus BLEU and the paired signed-rank test."""

from __future__ import annotations

import logging
import math
from collections import Counter
from typing import List, Sequence, Tuple, Union

import numpy as np
from scipy.stats import norm, rankdata

from .errors import DataError
from .models import AlignmentScore, AlignmentSet, GoldAlignment, SignificanceResult

logger = logging.getLogger(__name__)

EXACT_LIMIT = 25

Sentence = Union[str, Sequence[str]]


# ── AER ──


def score_from_counts(hyp: int, sure: int, possible: int, sure_matches: int, possible_matches: int) -> AlignmentScore:
    """Precision against P, recall against S; empty A has precision 1 and empty S recall 1."""
    precision = possible_matches / hyp if hyp else 1.0
    recall = sure_matches / sure if sure else 1.0
    denom = hyp + sure
    error = 1.0 - (sure_matches + possible_matches) / denom if denom else 0.0
    return AlignmentScore(
        aer=error,
        precision=precision,
        recall=recall,
        hyp_count=hyp,
        sure_count=sure,
        possible_count=possible,
        sure_matches=sure_matches,
        possible_matches=possible_matches,
    )


def score_sentence(hypothesis: AlignmentSet, gold: GoldAlignment) -> AlignmentScore:
    links = hypothesis.links
    return score_from_counts(
        len(links), len(gold.sure), len(gold.possible), len(links & gold.sure), len(links & gold.possible)
    )


def aer(hypotheses: Sequence[AlignmentSet], golds: Sequence[GoldAlignment]) -> Tuple[AlignmentScore, List[AlignmentScore]]:
    """Micro-averaged corpus score plus one score per sentence."""
    if len(hypotheses) != len(golds):
        raise DataError(f"{len(hypotheses)} hypothesis sentences but {len(golds)} gold sentences")
    per_sentence = [score_sentence(h, g) for h, g in zip(hypotheses, golds)]
    corpus = score_from_counts(
        sum(s.hyp_count for s in per_sentence),
        sum(s.sure_count for s in per_sentence),
        sum(s.possible_count for s in per_sentence),
        sum(s.sure_matches for s in per_sentence),
        sum(s.possible_matches for s in per_sentence),
    )
    return corpus, per_sentence


# ── Wilcoxon signed-rank ──


def _exact_two_sided(doubled_ranks: np.ndarray, doubled_stat: int) -> float:
    """P(|W| >= |w|) under random signs, via the distribution of the positive rank sum."""
    total = int(doubled_ranks.sum())
    counts = np.zeros(total + 1, dtype=np.float64)
    counts[0] = 1.0
    for r in doubled_ranks:
        counts[r:] = counts[r:] + counts[: total + 1 - r].copy()
    sums = np.arange(total + 1)
    extreme = np.abs(2 * sums - total) >= abs(doubled_stat)
    return float(counts[extreme].sum() / counts.sum())


def wilcoxon_signed_rank(a: Sequence[float], b: Sequence[float], alpha: float = 0.001) -> SignificanceResult:
    """Two-sided paired test on a - b; zero differences are dropped and tied |d| share average ranks."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DataError(f"paired samples differ in length: {a.size} vs {b.size}")
    d = a - b
    d = d[d != 0]
    n = int(d.size)
    if n == 0:
        return SignificanceResult(statistic=0.0, p_value=1.0, significant=False, n=0, exact=True)

    ranks = rankdata(np.abs(d))
    statistic = float(np.sum(np.sign(d) * ranks))
    if n <= EXACT_LIMIT:
        doubled = np.rint(2 * ranks).astype(np.int64)
        doubled_stat = int(np.rint(2 * statistic))
        p_value = _exact_two_sided(doubled, doubled_stat)
        exact = True
    else:
        variance = float(np.sum(ranks ** 2))
        p_value = float(min(1.0, 2.0 * norm.sf(abs(statistic) / math.sqrt(variance))))
        exact = False
    return SignificanceResult(
        statistic=statistic, p_value=p_value, significant=p_value < alpha, n=n, exact=exact
    )


# ── BLEU ──


def _tokens(sentence: Sentence) -> List[str]:
    return sentence.split() if isinstance(sentence, str) else list(sentence)


def _ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[k : k + n]) for k in range(len(tokens) - n + 1))


def ngram_statistics(hypotheses: Sequence[Sentence], references: Sequence[Sentence], max_n: int = 4):
    """Corpus-summed clipped matches and totals per order, plus hypothesis and reference lengths."""
    if len(hypotheses) != len(references):
        raise DataError(f"{len(hypotheses)} hypotheses but {len(references)} references")
    matches = [0] * max_n
    totals = [0] * max_n
    hyp_len = ref_len = 0
    for k, (hyp, ref) in enumerate(zip(hypotheses, references)):
        hyp_tokens, ref_tokens = _tokens(hyp), _tokens(ref)
        if not ref_tokens:
            raise DataError(f"reference sentence {k + 1} is empty")
        hyp_len += len(hyp_tokens)
        ref_len += len(ref_tokens)
        for n in range(1, max_n + 1):
            hyp_counts = _ngrams(hyp_tokens, n)
            ref_counts = _ngrams(ref_tokens, n)
            matches[n - 1] += sum(min(c, ref_counts[g]) for g, c in hyp_counts.items())
            totals[n - 1] += sum(hyp_counts.values())
    return matches, totals, hyp_len, ref_len


def corpus_bleu(hypotheses: Sequence[Sentence], references: Sequence[Sentence], max_n: int = 4, smooth: bool = False) -> float:
    """Geometric mean of clipped n-gram precisions times the brevity penalty, in [0, 1].

    ``smooth`` adds one to matches and totals of every order above 1.
    """
    matches, totals, hyp_len, ref_len = ngram_statistics(hypotheses, references, max_n)
    if hyp_len == 0:
        return 0.0
    log_precision = 0.0
    for n in range(max_n):
        m, t = matches[n], totals[n]
        if smooth and n > 0:
            m, t = m + 1, t + 1
        if m == 0 or t == 0:
            return 0.0
        log_precision += math.log(m / t) / max_n
    brevity = 1.0 if hyp_len > ref_len else math.exp(1.0 - ref_len / hyp_len)
    return brevity * math.exp(log_precision)
