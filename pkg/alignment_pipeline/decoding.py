"""Greedy and beam decoding with attention capture of the chosen hypothesis."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import log_softmax

from .bpe import BOS, EOS
from .errors import ParameterError
from .tensor import Tensor, no_grad
from .transformer import AttentionStack, EncoderOutput, Transformer

logger = logging.getLogger(__name__)

# prefixes (each starting with <bos>) -> next-token log-probabilities [n, V]
StepFn = Callable[[List[List[int]]], np.ndarray]


@dataclass
class Hypothesis:
    tokens: List[int]  # generated ids, ending with <eos>
    logprob: float
    truncated: bool = False
    attention: Optional[AttentionStack] = None

    @property
    def score(self) -> float:
        """Length-normalized log-probability."""
        return self.logprob / max(1, len(self.tokens))

    @property
    def output(self) -> List[int]:
        return self.tokens[:-1] if self.tokens and self.tokens[-1] == EOS else list(self.tokens)


def beam_search(step_fn: StepFn, bos: int = BOS, eos: int = EOS, beam_size: int = 5, max_len: int = 100) -> List[Hypothesis]:
    """Length-normalized beam search over a generic scoring function.

    Each step keeps the ``beam_size`` best extensions of all live prefixes;
    extensions ending in ``eos`` move to the finished pool. Prefixes still
    alive after ``max_len`` steps are closed with ``eos`` and flagged truncated.
    Returns finished hypotheses sorted best first.
    """
    if beam_size < 1:
        raise ParameterError(f"beam_size must be at least 1, got {beam_size}")
    if max_len < 1:
        raise ParameterError(f"max_len must be at least 1, got {max_len}")

    active: List[Tuple[List[int], float]] = [([bos], 0.0)]
    finished: List[Hypothesis] = []
    for _ in range(max_len):
        logprobs = np.asarray(step_fn([prefix for prefix, _ in active]), dtype=np.float64)
        candidates: List[Tuple[float, int, int]] = []
        for k, (_, score) in enumerate(active):
            row = logprobs[k]
            for tok in np.argsort(-row, kind="stable")[:beam_size]:
                candidates.append((score + float(row[tok]), k, int(tok)))
        candidates.sort(key=lambda c: (-c[0], c[1], c[2]))

        survivors: List[Tuple[List[int], float]] = []
        for score, k, tok in candidates[:beam_size]:
            prefix = active[k][0] + [tok]
            if tok == eos:
                finished.append(Hypothesis(tokens=prefix[1:], logprob=score))
            else:
                survivors.append((prefix, score))
        active = survivors
        if not active or len(finished) >= beam_size:
            break
    else:
        for prefix, score in active:
            finished.append(Hypothesis(tokens=prefix[1:] + [eos], logprob=score, truncated=True))

    order = sorted(range(len(finished)), key=lambda k: (-finished[k].score, k))
    return [finished[k] for k in order]


def _tile(enc: EncoderOutput, n: int) -> EncoderOutput:
    return EncoderOutput(
        states=Tensor(np.repeat(enc.states.data, n, axis=0)),
        src_valid=np.repeat(enc.src_valid, n, axis=0),
    )


def model_step_fn(model: Transformer, enc: EncoderOutput) -> StepFn:
    """Score next tokens by re-running the decoder over whole prefixes."""

    def step(prefixes: List[List[int]]) -> np.ndarray:
        tgt_in = np.asarray(prefixes, dtype=np.int64)
        out = model.decode(tgt_in, _tile(enc, len(prefixes)), causal=True)
        return log_softmax(out.logits.data[:, -1, :].astype(np.float64), axis=-1)

    return step


def force_decode_attention(model: Transformer, src_ids: Sequence[int], tgt_ids: Sequence[int], causal: bool) -> AttentionStack:
    """Attention of every layer and head while decoding the given target (which ends with ``<eos>``)."""
    src = np.asarray([list(src_ids) + [EOS]], dtype=np.int64)
    tgt_in = np.asarray([[BOS] + list(tgt_ids)[:-1]], dtype=np.int64)
    enc = model.encode(src, np.array([src.shape[1]]))
    out = model.decode(tgt_in, enc, causal=causal)
    return AttentionStack.from_batch(out.attention, 0, tgt_in.shape[1], src.shape[1])


def beam_decode(
    model: Transformer,
    src_ids: Sequence[int],
    beam_size: int = 5,
    max_len: int = 100,
    causal_attention: bool = True,
) -> Hypothesis:
    """Translate one source sentence; the best hypothesis carries its forced-decode attention."""
    was_training = model.training
    model.eval()
    try:
        with no_grad():
            src = np.asarray([list(src_ids) + [EOS]], dtype=np.int64)
            enc = model.encode(src, np.array([src.shape[1]]))
            best = beam_search(model_step_fn(model, enc), BOS, EOS, beam_size, max_len)[0]
            best.attention = force_decode_attention(model, src_ids, best.tokens, causal_attention)
    finally:
        model.train(was_training)
    if best.truncated:
        logger.debug("Hypothesis truncated at max_len=%d", max_len)
    return best


def greedy_decode(model: Transformer, src_ids: Sequence[int], max_len: int = 100) -> Hypothesis:
    return beam_decode(model, src_ids, beam_size=1, max_len=max_len)
