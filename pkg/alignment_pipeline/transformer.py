"""Encoder-decoder Transformer with encoder-decoder attention capture.

Pre-norm residual blocks, sinusoidal positions, optional shared
source/target/output embeddings. ``decode`` returns the logits together with
the encoder-decoder attention probabilities of every layer and head.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import functional as F
from .bpe import BOS, EOS, PAD
from .errors import CapacityError, ContractError, DimensionError, ParameterError
from .layers import Embedding, FeedForward, LayerNorm, Linear, Module
from .models import ModelConfig
from .tensor import Tensor, get_default_dtype, parameter

logger = logging.getLogger(__name__)


# ── Batches ──


@dataclass
class Batch:
    """Padded source/target index matrices.

    ``src`` carries ⟨eos⟩ after each sentence; ``tgt_in`` is the target shifted
    right behind ⟨bos⟩ and ``tgt_out`` the target followed by ⟨eos⟩.
    """

    src: np.ndarray
    src_lengths: np.ndarray
    tgt_in: np.ndarray
    tgt_out: np.ndarray
    tgt_lengths: np.ndarray
    indices: List[int] = field(default_factory=list)

    @classmethod
    def from_pairs(
        cls,
        sources: Sequence[Sequence[int]],
        targets: Sequence[Sequence[int]],
        indices: Optional[Sequence[int]] = None,
        width: Optional[Tuple[int, int]] = None,
    ) -> "Batch":
        if len(sources) != len(targets) or not sources:
            raise ContractError(f"batch needs equal, non-zero source/target counts ({len(sources)} vs {len(targets)})")
        src_lengths = np.array([len(s) + 1 for s in sources], dtype=np.int64)
        tgt_lengths = np.array([len(t) + 1 for t in targets], dtype=np.int64)
        src_width = int(src_lengths.max())
        tgt_width = int(tgt_lengths.max())
        if width is not None:
            src_width = max(src_width, width[0])
            tgt_width = max(tgt_width, width[1])
        b = len(sources)
        src = np.full((b, src_width), PAD, dtype=np.int64)
        tgt_in = np.full((b, tgt_width), PAD, dtype=np.int64)
        tgt_out = np.full((b, tgt_width), PAD, dtype=np.int64)
        for k, (s, t) in enumerate(zip(sources, targets)):
            src[k, : len(s)] = s
            src[k, len(s)] = EOS
            tgt_in[k, 0] = BOS
            tgt_in[k, 1 : len(t) + 1] = t
            tgt_out[k, : len(t)] = t
            tgt_out[k, len(t)] = EOS
        return cls(
            src=src,
            src_lengths=src_lengths,
            tgt_in=tgt_in,
            tgt_out=tgt_out,
            tgt_lengths=tgt_lengths,
            indices=list(indices) if indices is not None else list(range(b)),
        )

    @property
    def size(self) -> int:
        return self.src.shape[0]

    @property
    def src_valid(self) -> np.ndarray:
        return np.arange(self.src.shape[1])[None, :] < self.src_lengths[:, None]

    @property
    def tgt_valid(self) -> np.ndarray:
        return np.arange(self.tgt_in.shape[1])[None, :] < self.tgt_lengths[:, None]

    @property
    def num_target_tokens(self) -> int:
        return int(self.tgt_lengths.sum())


# ── Attention capture ──


@dataclass
class AttentionStack:
    """Per-layer encoder-decoder attention for one sentence: arrays [heads, I, J]."""

    layers: List[np.ndarray]

    @property
    def n_layers(self) -> int:
        return len(self.layers)

    @property
    def n_heads(self) -> int:
        return self.layers[0].shape[0] if self.layers else 0

    def head(self, layer: int, head: int) -> np.ndarray:
        """Attention matrix of a 1-based (layer, head)."""
        if not 1 <= layer <= self.n_layers:
            raise ParameterError(f"layer {layer} outside [1, {self.n_layers}]")
        if not 1 <= head <= self.n_heads:
            raise ParameterError(f"head {head} outside [1, {self.n_heads}]")
        return self.layers[layer - 1][head - 1]

    @classmethod
    def from_batch(cls, attention: Sequence[Tensor], batch_row: int, tgt_len: int, src_len: int) -> "AttentionStack":
        return cls(layers=[a.data[batch_row, :, :tgt_len, :src_len].copy() for a in attention])


@dataclass
class EncoderOutput:
    states: Tensor  # [B, J, d]
    src_valid: np.ndarray  # [B, J] bool

    @property
    def key_mask(self) -> np.ndarray:
        """Additive mask [B, 1, 1, J] hiding padded source positions."""
        return padding_mask(self.src_valid, self.states.dtype)


@dataclass
class DecoderOutput:
    logits: Tensor  # [B, I, V]
    attention: List[Tensor]  # per layer [B, N, I, J]


def padding_mask(valid: np.ndarray, dtype) -> np.ndarray:
    mask = np.where(valid, 0.0, -np.inf).astype(dtype)
    return mask[:, None, None, :]


def causal_mask(length: int, dtype) -> np.ndarray:
    upper = np.triu(np.ones((length, length), dtype=bool), k=1)
    return np.where(upper, -np.inf, 0.0).astype(dtype)[None, None, :, :]


def sinusoidal_positions(max_positions: int, d: int) -> np.ndarray:
    positions = np.arange(max_positions)[:, None]
    rates = np.exp(-np.log(10000.0) * (2 * (np.arange(d) // 2)) / d)[None, :]
    angles = positions * rates
    table = np.zeros((max_positions, d))
    table[:, 0::2] = np.sin(angles[:, 0::2])
    table[:, 1::2] = np.cos(angles[:, 1::2])
    return table


# ── Sub-layers ──


class MultiHeadAttention(Module):
    """Scaled dot-product attention in N subspaces, concatenated and projected."""

    def __init__(self, d_emb: int, n_heads: int, rng: np.random.Generator):
        if d_emb % n_heads:
            raise ParameterError(f"d_emb={d_emb} is not divisible by n_heads={n_heads}")
        self.n_heads = n_heads
        self.d_k = d_emb // n_heads
        self.w_q = Linear(d_emb, d_emb, rng)
        self.w_k = Linear(d_emb, d_emb, rng)
        self.w_v = Linear(d_emb, d_emb, rng)
        self.w_o = Linear(d_emb, d_emb, rng)

    def _split(self, x: Tensor) -> Tensor:
        b, length, _ = x.shape
        return x.reshape(b, length, self.n_heads, self.d_k).transpose(0, 2, 1, 3)

    def __call__(self, q: Tensor, k: Tensor, v: Tensor, mask: Optional[np.ndarray] = None) -> Tuple[Tensor, Tensor]:
        if q.shape[-1] != self.w_q.weight.shape[0] or k.shape[-1] != q.shape[-1] or v.shape[-1] != q.shape[-1]:
            raise DimensionError(f"query {q.shape}, key {k.shape} and value {v.shape} disagree on d_emb")
        b, length, d = q.shape
        heads_q = self._split(self.w_q(q))
        heads_k = self._split(self.w_k(k))
        heads_v = self._split(self.w_v(v))
        scores = F.matmul(heads_q, F.transpose_last(heads_k)) * (1.0 / np.sqrt(self.d_k))
        probs = F.masked_softmax(scores, mask)
        context = F.matmul(probs, heads_v).transpose(0, 2, 1, 3).reshape(b, length, d)
        return self.w_o(context), probs


class EncoderLayer(Module):
    def __init__(self, config: ModelConfig, rng: np.random.Generator):
        self.self_attn = MultiHeadAttention(config.d_emb, config.n_heads, rng)
        self.self_attn_norm = LayerNorm(config.d_emb)
        self.ffn = FeedForward(config.d_emb, config.d_ff, rng)
        self.ffn_norm = LayerNorm(config.d_emb)
        self.p = config.dropout

    def __call__(self, x: Tensor, mask: np.ndarray, rng: Optional[np.random.Generator]) -> Tensor:
        h = self.self_attn_norm(x)
        attn_out, _ = self.self_attn(h, h, h, mask)
        x = x + F.dropout(attn_out, self.p, rng, self.training)
        x = x + F.dropout(self.ffn(self.ffn_norm(x), self.p, rng), self.p, rng, self.training)
        return x


class DecoderLayer(Module):
    def __init__(self, config: ModelConfig, rng: np.random.Generator):
        self.self_attn = MultiHeadAttention(config.d_emb, config.n_heads, rng)
        self.self_attn_norm = LayerNorm(config.d_emb)
        self.cross_attn = MultiHeadAttention(config.d_emb, config.n_heads, rng)
        self.cross_attn_norm = LayerNorm(config.d_emb)
        self.ffn = FeedForward(config.d_emb, config.d_ff, rng)
        self.ffn_norm = LayerNorm(config.d_emb)
        self.p = config.dropout

    def __call__(
        self,
        x: Tensor,
        enc: EncoderOutput,
        self_mask: np.ndarray,
        rng: Optional[np.random.Generator],
    ) -> Tuple[Tensor, Tensor]:
        h = self.self_attn_norm(x)
        attn_out, _ = self.self_attn(h, h, h, self_mask)
        x = x + F.dropout(attn_out, self.p, rng, self.training)
        h = self.cross_attn_norm(x)
        cross_out, probs = self.cross_attn(h, enc.states, enc.states, enc.key_mask)
        x = x + F.dropout(cross_out, self.p, rng, self.training)
        x = x + F.dropout(self.ffn(self.ffn_norm(x), self.p, rng), self.p, rng, self.training)
        return x, probs


# ── Model ──


class Transformer(Module):
    def __init__(self, config: ModelConfig, vocab_size: int, seed: int = 1):
        if vocab_size <= 4:
            raise ParameterError(f"vocabulary of size {vocab_size} has no room beyond the reserved tokens")
        rng = np.random.default_rng(seed)
        self.config = config
        self.vocab_size = vocab_size
        self.src_embed = Embedding(vocab_size, config.d_emb, rng, padding_idx=PAD)
        if config.share_embeddings:
            self.tgt_embed = self.src_embed
            self.out_proj = None
        else:
            self.tgt_embed = Embedding(vocab_size, config.d_emb, rng, padding_idx=PAD)
            bound = 1.0 / np.sqrt(config.d_emb)
            self.out_proj = parameter(
                rng.uniform(-bound, bound, size=(vocab_size, config.d_emb)).astype(get_default_dtype())
            )
        self.encoder_layers = [EncoderLayer(config, rng) for _ in range(config.n_layers)]
        self.encoder_norm = LayerNorm(config.d_emb)
        self.decoder_layers = [DecoderLayer(config, rng) for _ in range(config.n_layers)]
        self.decoder_norm = LayerNorm(config.d_emb)
        self._positions = sinusoidal_positions(config.max_positions, config.d_emb)

    @property
    def output_weight(self) -> Tensor:
        """[V, d] matrix the decoder states are projected onto."""
        return self.tgt_embed.weight if self.out_proj is None else self.out_proj

    def _embed(self, ids: np.ndarray, table: Embedding, rng: Optional[np.random.Generator]) -> Tensor:
        length = ids.shape[1]
        if length > self.config.max_positions:
            raise CapacityError(f"sequence of length {length} exceeds max_positions={self.config.max_positions}")
        x = table(ids) * float(np.sqrt(self.config.d_emb))
        x = x + Tensor(self._positions[:length], dtype=x.dtype)
        return F.dropout(x, self.config.dropout, rng, self.training)

    def encode(self, src: np.ndarray, src_lengths: np.ndarray, rng: Optional[np.random.Generator] = None) -> EncoderOutput:
        valid = np.arange(src.shape[1])[None, :] < np.asarray(src_lengths)[:, None]
        x = self._embed(src, self.src_embed, rng)
        mask = padding_mask(valid, x.dtype)
        for layer in self.encoder_layers:
            x = layer(x, mask, rng)
        return EncoderOutput(states=self.encoder_norm(x), src_valid=valid)

    def decode(
        self,
        tgt_in: np.ndarray,
        enc: EncoderOutput,
        tgt_lengths: Optional[np.ndarray] = None,
        causal: bool = True,
        rng: Optional[np.random.Generator] = None,
    ) -> DecoderOutput:
        """Run the decoder; ``causal=False`` drops the future mask (full target context)."""
        if tgt_in.shape[0] != enc.states.shape[0]:
            raise ContractError(
                f"decoder batch of {tgt_in.shape[0]} does not match encoder batch of {enc.states.shape[0]}"
            )
        length = tgt_in.shape[1]
        if tgt_lengths is None:
            tgt_lengths = np.full(tgt_in.shape[0], length)
        valid = np.arange(length)[None, :] < np.asarray(tgt_lengths)[:, None]
        x = self._embed(tgt_in, self.tgt_embed, rng)
        self_mask = padding_mask(valid, x.dtype)
        if causal:
            self_mask = self_mask + causal_mask(length, x.dtype)
        attention: List[Tensor] = []
        for layer in self.decoder_layers:
            x, probs = layer(x, enc, self_mask, rng)
            attention.append(probs)
        x = self.decoder_norm(x)
        logits = F.matmul(x, F.transpose_last(self.output_weight))
        return DecoderOutput(logits=logits, attention=attention)

    def forward(self, batch: Batch, causal: bool = True, rng: Optional[np.random.Generator] = None) -> DecoderOutput:
        enc = self.encode(batch.src, batch.src_lengths, rng)
        return self.decode(batch.tgt_in, enc, batch.tgt_lengths, causal=causal, rng=rng)

    def num_parameters(self) -> int:
        return sum(p.size for p in self.parameters())
