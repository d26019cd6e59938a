"""IBM Model 1 and a first-order HMM aligner trained with EM.

Both models generate each target word from one source position or from the
NULL word. Translation probabilities live in a sparse ``LexiconTable`` keyed
by co-occurring (source, target) word pairs, stored as one flat array so the
M-step is a pair of ``bincount`` calls.

HMM states are the J source positions followed by J NULL states; a NULL
state remembers the position it was entered from. Transitions choose NULL
with probability ``null_prob``; otherwise the next position is drawn from a
mixture of fixed jump components (one per jump bucket, outer buckets spread
uniformly over farther positions, every component clamped to the sentence).
Every M-step update is a closed-form maximizer, so the corpus likelihood
never decreases.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from tqdm import tqdm

from .errors import DataError, DefinednessError, ParameterError
from .export import atomic_write_text
from .extraction import symmetrize_corpus
from .models import AlignerConfig, AlignmentSet

logger = logging.getLogger(__name__)

NULL_WORD = "<null>"
EMISSION_FLOOR = 1e-12
_LOG_TINY = 1e-300

SentencePair = Tuple[Sequence[str], Sequence[str]]


# ── Lexicon ──


@dataclass
class LexiconTable:
    """t(f | e) over co-occurring pairs; source id 0 is the NULL word."""

    source_words: List[str]
    target_words: List[str]
    pair_index: Dict[Tuple[int, int], int]
    values: np.ndarray
    use_null: bool = True
    history: List[float] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.source_ids = {w: k for k, w in enumerate(self.source_words)}
        self.target_ids = {w: k for k, w in enumerate(self.target_words)}
        self.pair_source = np.zeros(len(self.pair_index), dtype=np.int64)
        for (e, _), pid in self.pair_index.items():
            self.pair_source[pid] = e

    @property
    def uniform(self) -> float:
        return 1.0 / max(1, len(self.target_words))

    def copy(self) -> "LexiconTable":
        return LexiconTable(
            list(self.source_words), list(self.target_words), dict(self.pair_index), self.values.copy(), self.use_null
        )

    def prob(self, f: str, e: str) -> float:
        """t(f | e); use ``NULL_WORD`` for the NULL source word."""
        if e not in self.source_ids or f not in self.target_ids:
            return self.uniform
        pid = self.pair_index.get((self.source_ids[e], self.target_ids[f]))
        return 0.0 if pid is None else float(self.values[pid])

    def totals(self) -> np.ndarray:
        """Σ_f t(f | e) for every source word id."""
        return np.bincount(self.pair_source, weights=self.values, minlength=len(self.source_words))

    def normalize(self, counts: np.ndarray) -> None:
        totals = np.bincount(self.pair_source, weights=counts, minlength=len(self.source_words))
        denom = totals[self.pair_source]
        self.values = np.divide(counts, denom, out=np.zeros_like(counts), where=denom > 0)

    def emission_matrix(self, src: Sequence[str], tgt: Sequence[str]) -> np.ndarray:
        """[J+1, I] table of t(f_i | e_j), row 0 being NULL.

        Unknown words get the uniform emission; known pairs never seen together get a small floor.
        """
        rows = [0] + [self.source_ids.get(w, -1) for w in src]
        cols = [self.target_ids.get(w, -1) for w in tgt]
        table = np.empty((len(rows), len(cols)))
        for r, e in enumerate(rows):
            for c, f in enumerate(cols):
                if e < 0 or f < 0:
                    table[r, c] = self.uniform
                else:
                    pid = self.pair_index.get((e, f))
                    table[r, c] = EMISSION_FLOOR if pid is None else max(self.values[pid], EMISSION_FLOOR)
        return table

    def rows(self, threshold: float = 0.0) -> List[Tuple[str, str, float]]:
        """(e, f, t(f|e)) entries above ``threshold``, grouped by e, most probable first."""
        out = []
        for (e, f), pid in self.pair_index.items():
            value = float(self.values[pid])
            if value > threshold:
                out.append((self.source_words[e], self.target_words[f], value))
        out.sort(key=lambda row: (row[0], -row[2], row[1]))
        return out


def write_lexicon(table: LexiconTable, path: Union[str, Path], threshold: float = 1e-6) -> None:
    lines = [f"{e}\t{f}\t{p:.6g}\n" for e, f, p in table.rows(threshold)]
    atomic_write_text(path, "".join(lines))
    logger.info("Wrote %d lexicon entries to %s", len(lines), path)


@dataclass
class _EncodedPair:
    index: int
    pair_ids: np.ndarray  # [J+1, I]; row 0 is the NULL row


def _encode(pairs: Sequence[SentencePair], table: Optional[LexiconTable] = None) -> Tuple[LexiconTable, List[_EncodedPair]]:
    """Index the corpus, extending ``table`` (or a fresh uniform one) with unseen words and pairs."""
    if table is None:
        source_words = [NULL_WORD] + sorted({w for src, _ in pairs for w in src})
        target_words = sorted({w for _, tgt in pairs for w in tgt})
        table = LexiconTable(source_words, target_words, {}, np.zeros(0))
    source_ids = dict(table.source_ids)
    target_ids = dict(table.target_ids)
    source_words = list(table.source_words)
    target_words = list(table.target_words)
    pair_index = dict(table.pair_index)

    encoded: List[_EncodedPair] = []
    for k, (src, tgt) in enumerate(pairs):
        if not src or not tgt:
            continue
        for w in src:
            if w not in source_ids:
                source_ids[w] = len(source_words)
                source_words.append(w)
        for w in tgt:
            if w not in target_ids:
                target_ids[w] = len(target_words)
                target_words.append(w)
        rows = [0] + [source_ids[w] for w in src]
        grid = np.empty((len(rows), len(tgt)), dtype=np.int64)
        for r, e in enumerate(rows):
            for c, w in enumerate(tgt):
                grid[r, c] = pair_index.setdefault((e, target_ids[w]), len(pair_index))
        encoded.append(_EncodedPair(index=k, pair_ids=grid))
    if not encoded:
        raise DataError("cannot train an aligner on a corpus without non-empty sentence pairs")

    values = np.full(len(pair_index), 1.0 / len(target_words))
    values[: len(table.values)] = table.values
    extended = LexiconTable(source_words, target_words, pair_index, values, table.use_null)
    return extended, encoded


# ── IBM Model 1 ──


def ibm1_posteriors(table: LexiconTable, src: Sequence[str], tgt: Sequence[str]) -> np.ndarray:
    """p(a_i = j | f, e) as a [rows, I] matrix; row 0 is NULL when the table uses NULL."""
    emissions = table.emission_matrix(src, tgt)
    if not table.use_null:
        emissions = emissions[1:]
    return emissions / emissions.sum(axis=0, keepdims=True)


def ibm1_em(pairs: Sequence[SentencePair], iterations: int = 5, use_null: bool = True, show_progress: bool = False) -> LexiconTable:
    """Uniform-initialized IBM1 EM.

    ``history`` holds the corpus log-likelihood before the first and after every iteration.
    """
    if iterations < 1:
        raise ParameterError(f"IBM1 needs at least one iteration, got {iterations}")
    table, encoded = _encode(pairs)
    table.use_null = use_null
    n_pairs = len(table.pair_index)
    logger.info("IBM1: %d sentence pairs, %d source / %d target types, %d word pairs",
                len(encoded), len(table.source_words) - 1, len(table.target_words), n_pairs)

    def e_step() -> Tuple[float, np.ndarray]:
        log_likelihood = 0.0
        index_chunks, weight_chunks = [], []
        for sent in encoded:
            rows = sent.pair_ids if use_null else sent.pair_ids[1:]
            emissions = table.values[rows]
            column = emissions.sum(axis=0)
            if np.any(column <= 0):
                raise DefinednessError(f"sentence {sent.index} has zero likelihood under IBM1")
            log_likelihood += float(np.log(column).sum()) - rows.shape[1] * np.log(rows.shape[0])
            index_chunks.append(rows.ravel())
            weight_chunks.append((emissions / column).ravel())
        counts = np.bincount(np.concatenate(index_chunks), weights=np.concatenate(weight_chunks), minlength=n_pairs)
        return log_likelihood, counts

    for iteration in tqdm(range(iterations), desc="IBM1 EM", disable=not show_progress):
        log_likelihood, counts = e_step()
        table.history.append(log_likelihood)
        table.normalize(counts)
        logger.debug("IBM1 iteration %d: log-likelihood %.6f", iteration + 1, log_likelihood)
    table.history.append(e_step()[0])
    logger.info("IBM1 log-likelihood %.4f -> %.4f", table.history[0], table.history[-1])
    return table


# ── HMM ──


@dataclass
class HmmParams:
    lexicon: LexiconTable
    jump_probs: np.ndarray  # weights of jump buckets -max_jump..+max_jump
    null_prob: float
    max_jump: int = 7
    use_null: bool = True
    history: List[float] = field(default_factory=list)

    @property
    def jumps(self) -> np.ndarray:
        return np.arange(-self.max_jump, self.max_jump + 1)

    def jump_distribution(self) -> Dict[int, float]:
        return {int(d): float(p) for d, p in zip(self.jumps, self.jump_probs)}

    def mode_jump(self) -> int:
        return int(self.jumps[int(np.argmax(self.jump_probs))])


@lru_cache(maxsize=256)
def jump_components(length: int, max_jump: int) -> np.ndarray:
    """[buckets, from, to] distributions of each jump bucket in a sentence of ``length`` positions."""
    phi = np.zeros((2 * max_jump + 1, length, length))
    positions = np.arange(length)
    for b, jump in enumerate(range(-max_jump, max_jump + 1)):
        for p in range(length):
            if jump == max_jump:
                far = positions[positions - p >= max_jump]
                if far.size:
                    phi[b, p, far] = 1.0 / far.size
                else:
                    phi[b, p, length - 1] = 1.0
            elif jump == -max_jump:
                far = positions[positions - p <= -max_jump]
                if far.size:
                    phi[b, p, far] = 1.0 / far.size
                else:
                    phi[b, p, 0] = 1.0
            else:
                phi[b, p, min(max(p + jump, 0), length - 1)] = 1.0
    phi.setflags(write=False)
    return phi


def _hmm_model(params: HmmParams, emissions: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Initial distribution, transition matrix and [states, I] emissions for one sentence."""
    length = emissions.shape[0] - 1
    jump = np.tensordot(params.jump_probs, jump_components(length, params.max_jump), axes=1)
    if not params.use_null:
        return np.full(length, 1.0 / length), jump, emissions[1:]
    p0 = params.null_prob
    states = 2 * length
    transition = np.zeros((states, states))
    transition[:, :length] = (1.0 - p0) * np.vstack([jump, jump])
    transition[np.arange(states), length + np.arange(states) % length] = p0
    initial = np.concatenate([np.full(length, (1.0 - p0) / length), np.full(length, p0 / length)])
    return initial, transition, np.vstack([emissions[1:], np.tile(emissions[0], (length, 1))])


def forward_backward(
    initial: np.ndarray, transition: np.ndarray, emissions: np.ndarray
) -> Tuple[np.ndarray, np.ndarray, float]:
    """Scaled forward-backward.

    Returns state posteriors [I, S], summed expected transitions [S, S] and the log-likelihood.
    """
    states, steps = emissions.shape
    alpha = np.zeros((steps, states))
    beta = np.ones((steps, states))
    scale = np.zeros(steps)
    a = initial * emissions[:, 0]
    for i in range(steps):
        if i:
            a = (alpha[i - 1] @ transition) * emissions[:, i]
        scale[i] = a.sum()
        if scale[i] <= 0:
            raise DefinednessError(f"zero forward probability at target position {i}")
        alpha[i] = a / scale[i]
    for i in range(steps - 2, -1, -1):
        beta[i] = transition @ (emissions[:, i + 1] * beta[i + 1]) / scale[i + 1]
    posteriors = alpha * beta
    expected = np.zeros((states, states))
    for i in range(1, steps):
        expected += np.outer(alpha[i - 1], emissions[:, i] * beta[i] / scale[i])
    expected *= transition
    return posteriors, expected, float(np.log(scale).sum())


def hmm_em(
    pairs: Sequence[SentencePair],
    iterations: int,
    init: LexiconTable,
    max_jump: int = 7,
    null_prob: float = 0.2,
    use_null: bool = True,
    show_progress: bool = False,
) -> HmmParams:
    """Baum-Welch over the jump-mixture HMM, starting from ``init`` and uniform jumps."""
    if iterations < 0:
        raise ParameterError(f"HMM iterations must be non-negative, got {iterations}")
    lexicon, encoded = _encode(pairs, init.copy())
    lexicon.use_null = use_null
    params = HmmParams(
        lexicon=lexicon,
        jump_probs=np.full(2 * max_jump + 1, 1.0 / (2 * max_jump + 1)),
        null_prob=null_prob,
        max_jump=max_jump,
        use_null=use_null,
    )
    n_pairs = len(lexicon.pair_index)

    def e_step():
        log_likelihood = 0.0
        index_chunks, weight_chunks = [], []
        jump_counts = np.zeros_like(params.jump_probs)
        null_count = real_count = 0.0
        for sent in encoded:
            emissions = params.lexicon.values[sent.pair_ids]
            length = emissions.shape[0] - 1
            initial, transition, state_emissions = _hmm_model(params, emissions)
            posteriors, expected, ll = forward_backward(initial, transition, state_emissions)
            log_likelihood += ll

            index_chunks.append(sent.pair_ids[1:].ravel())
            weight_chunks.append(posteriors[:, :length].T.ravel())
            if use_null:
                index_chunks.append(sent.pair_ids[0])
                weight_chunks.append(posteriors[:, length:].sum(axis=1))
                null_count += expected[:, length:].sum() + posteriors[0, length:].sum()
                real_count += expected[:, :length].sum() + posteriors[0, :length].sum()
                moves = expected[:length, :length] + expected[length:, :length]
            else:
                moves = expected
            phi = jump_components(length, max_jump)
            mixture = np.tensordot(params.jump_probs, phi, axes=1)
            share = np.divide(moves, mixture, out=np.zeros_like(moves), where=mixture > 0)
            jump_counts += params.jump_probs * np.einsum("bpj,pj->b", phi, share)

        counts = np.bincount(np.concatenate(index_chunks), weights=np.concatenate(weight_chunks), minlength=n_pairs)
        return log_likelihood, counts, jump_counts, null_count, real_count

    for iteration in tqdm(range(iterations), desc="HMM EM", disable=not show_progress):
        log_likelihood, counts, jump_counts, null_count, real_count = e_step()
        params.history.append(log_likelihood)
        params.lexicon.normalize(counts)
        if jump_counts.sum() > 0:
            params.jump_probs = jump_counts / jump_counts.sum()
        if use_null and null_count + real_count > 0:
            params.null_prob = float(null_count / (null_count + real_count))
        logger.debug("HMM iteration %d: log-likelihood %.6f, p0 %.4f", iteration + 1, log_likelihood, params.null_prob)
    if iterations:
        params.history.append(e_step()[0])
        logger.info("HMM log-likelihood %.4f -> %.4f, jump mode %+d", params.history[0], params.history[-1], params.mode_jump())
    return params


def hmm_posteriors(params: HmmParams, src: Sequence[str], tgt: Sequence[str]) -> np.ndarray:
    """[I, states] posterior over HMM states for each target position."""
    initial, transition, emissions = _hmm_model(params, params.lexicon.emission_matrix(src, tgt))
    return forward_backward(initial, transition, emissions)[0]


def hmm_path_log_prob(params: HmmParams, src: Sequence[str], tgt: Sequence[str], path: Sequence[int]) -> float:
    initial, transition, emissions = _hmm_model(params, params.lexicon.emission_matrix(src, tgt))
    logp = np.log(max(initial[path[0]], _LOG_TINY)) + np.log(max(emissions[path[0], 0], _LOG_TINY))
    for i in range(1, len(path)):
        logp += np.log(max(transition[path[i - 1], path[i]], _LOG_TINY))
        logp += np.log(max(emissions[path[i], i], _LOG_TINY))
    return float(logp)


def viterbi_path(initial: np.ndarray, transition: np.ndarray, emissions: np.ndarray) -> List[int]:
    """Most probable state sequence; ties go to the lowest state index."""
    log_t = np.log(np.maximum(transition, _LOG_TINY))
    log_e = np.log(np.maximum(emissions, _LOG_TINY))
    delta = np.log(np.maximum(initial, _LOG_TINY)) + log_e[:, 0]
    backpointers = []
    states = np.arange(len(initial))
    for i in range(1, emissions.shape[1]):
        scores = delta[:, None] + log_t
        best = np.argmax(scores, axis=0)
        backpointers.append(best)
        delta = scores[best, states] + log_e[:, i]
    path = [int(np.argmax(delta))]
    for best in reversed(backpointers):
        path.append(int(best[path[-1]]))
    return path[::-1]


# ── Alignment ──


def viterbi_align(model: Union[LexiconTable, HmmParams], src: Sequence[str], tgt: Sequence[str]) -> AlignmentSet:
    """Best alignment of one pair; NULL-aligned target words get no link."""
    src, tgt = list(src), list(tgt)
    if not src or not tgt:
        return AlignmentSet.of((), len(src), len(tgt))
    if isinstance(model, HmmParams):
        initial, transition, emissions = _hmm_model(model, model.lexicon.emission_matrix(src, tgt))
        path = viterbi_path(initial, transition, emissions)
        links = [(state, i) for i, state in enumerate(path) if state < len(src)]
        return AlignmentSet.of(links, len(src), len(tgt))

    emissions = model.emission_matrix(src, tgt)
    real = emissions[1:]
    best = np.argmax(real, axis=0)
    links = []
    for i, j in enumerate(best):
        # NULL only wins when strictly more probable
        if model.use_null and emissions[0, i] > real[j, i]:
            continue
        links.append((int(j), i))
    return AlignmentSet.of(links, len(src), len(tgt))


AlignerModel = Union[LexiconTable, HmmParams]


def train_aligner(pairs: Sequence[SentencePair], config: AlignerConfig, show_progress: bool = False) -> AlignerModel:
    """IBM1 iterations, then HMM iterations initialized from the IBM1 lexicon."""
    lexicon = ibm1_em(pairs, config.ibm1_iterations, config.use_null, show_progress)
    if config.model == "ibm1":
        return lexicon
    return hmm_em(pairs, config.hmm_iterations, lexicon, config.max_jump, config.null_prob, config.use_null, show_progress)


def train_bidirectional(
    pairs: Sequence[SentencePair], config: AlignerConfig, show_progress: bool = False
) -> Tuple[AlignerModel, AlignerModel]:
    forward = train_aligner(pairs, config, show_progress)
    reverse = train_aligner([(tgt, src) for src, tgt in pairs], config, show_progress)
    return forward, reverse


def lexicon_of(model: AlignerModel) -> LexiconTable:
    return model.lexicon if isinstance(model, HmmParams) else model


def align_corpus_bidirectional(
    pairs: Sequence[SentencePair],
    config: AlignerConfig,
    final_step: bool = False,
    models: Optional[Tuple[AlignerModel, AlignerModel]] = None,
) -> List[AlignmentSet]:
    """Train (unless ``models`` is given) both directions, align, and symmetrize with grow-diagonal."""
    forward_model, reverse_model = models if models is not None else train_bidirectional(pairs, config)
    forward = [viterbi_align(forward_model, src, tgt) for src, tgt in pairs]
    reverse = [viterbi_align(reverse_model, tgt, src) for src, tgt in pairs]
    symmetrized = symmetrize_corpus(forward, reverse, final_step)
    logger.info(
        "Aligned %d pairs: %d forward, %d reverse, %d symmetrized links",
        len(pairs), sum(map(len, forward)), sum(map(len, reverse)), sum(map(len, symmetrized)),
    )
    return symmetrized
