"""Neural-network operations with their backward rules."""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from .errors import ContractError, DefinednessError, DimensionError, ParameterError
from .tensor import Function, MatMul, Tensor

LOG_FLOOR = 1e-9


def matmul(a: Tensor, b: Tensor) -> Tensor:
    return MatMul.apply(a, b)


def transpose_last(x: Tensor) -> Tensor:
    """Swap the last two axes."""
    axes = list(range(x.ndim))
    axes[-1], axes[-2] = axes[-2], axes[-1]
    return x.transpose(*axes)


class MaskedSoftmax(Function):
    def forward(self, x: np.ndarray, mask: Optional[np.ndarray] = None) -> np.ndarray:
        if x.shape[-1] < 1:
            raise DimensionError(f"softmax over an empty axis, shape {x.shape}")
        if mask is not None:
            try:
                z = x + mask
            except ValueError as exc:
                raise DimensionError(f"mask shape {mask.shape} does not broadcast to {x.shape}") from exc
        else:
            z = x
        if np.isneginf(z).all(axis=-1).any():
            raise DefinednessError("softmax slice with every entry masked has no valid support")
        shifted = z - z.max(axis=-1, keepdims=True)
        e = np.exp(shifted)
        self.probs = e / e.sum(axis=-1, keepdims=True)
        return self.probs

    def backward(self, grad: np.ndarray):
        p = self.probs
        return (p * (grad - (grad * p).sum(axis=-1, keepdims=True)),)


def masked_softmax(x: Tensor, mask: Optional[np.ndarray] = None) -> Tensor:
    """Softmax over the last axis; ``mask`` is additive (0 or -inf)."""
    return MaskedSoftmax.apply(x, mask=mask)


class LayerNorm(Function):
    def forward(self, x: np.ndarray, gamma: np.ndarray, beta: np.ndarray, eps: float = 1e-5) -> np.ndarray:
        mu = x.mean(axis=-1, keepdims=True)
        var = x.var(axis=-1, keepdims=True)
        self.inv_std = 1.0 / np.sqrt(var + eps)
        self.xhat = (x - mu) * self.inv_std
        return self.xhat * gamma + beta

    def backward(self, grad: np.ndarray):
        x, gamma, beta = self.inputs
        n = x.shape[-1]
        lead = tuple(range(grad.ndim - 1))
        dxhat = grad * gamma.data
        dx = (self.inv_std / n) * (
            n * dxhat
            - dxhat.sum(axis=-1, keepdims=True)
            - self.xhat * (dxhat * self.xhat).sum(axis=-1, keepdims=True)
        )
        dgamma = (grad * self.xhat).sum(axis=lead)
        dbeta = grad.sum(axis=lead)
        return dx, dgamma, dbeta


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    return LayerNorm.apply(x, gamma, beta, eps=eps)


class ReLU(Function):
    def forward(self, x: np.ndarray) -> np.ndarray:
        self.active = x > 0
        return np.where(self.active, x, 0).astype(x.dtype)

    def backward(self, grad: np.ndarray):
        return (grad * self.active,)


def relu(x: Tensor) -> Tensor:
    return ReLU.apply(x)


class EmbeddingLookup(Function):
    def forward(self, weight: np.ndarray, indices: np.ndarray) -> np.ndarray:
        if indices.size and (indices.min() < 0 or indices.max() >= weight.shape[0]):
            raise DimensionError(
                f"embedding index out of range [0, {weight.shape[0]}): min {indices.min()}, max {indices.max()}"
            )
        self.indices = indices
        return weight[indices]

    def backward(self, grad: np.ndarray):
        out = np.zeros_like(self.inputs[0].data)
        np.add.at(out, self.indices, grad)
        return (out,)


def embedding_lookup(weight: Tensor, indices: np.ndarray) -> Tensor:
    return EmbeddingLookup.apply(weight, indices=np.asarray(indices, dtype=np.int64))


class Dropout(Function):
    def forward(self, x: np.ndarray, keep: np.ndarray) -> np.ndarray:
        self.keep = keep
        return x * keep

    def backward(self, grad: np.ndarray):
        return (grad * self.keep,)


def dropout(x: Tensor, p: float, rng: Optional[np.random.Generator], training: bool) -> Tensor:
    """Inverted dropout; the identity outside training mode or when p == 0."""
    if not 0.0 <= p < 1.0:
        raise ParameterError(f"dropout probability must lie in [0, 1), got {p}")
    if not training or p == 0.0:
        return x
    if rng is None:
        raise ContractError("dropout in training mode needs a seeded random generator")
    keep = (rng.random(x.shape) >= p).astype(x.dtype) / x.dtype.type(1.0 - p)
    return Dropout.apply(x, keep=keep)


class ConcatLastAxis(Function):
    def forward(self, *arrays: np.ndarray) -> np.ndarray:
        lead = {a.shape[:-1] for a in arrays}
        if len(lead) != 1:
            raise DimensionError(f"cannot concatenate shapes {[a.shape for a in arrays]} on the last axis")
        self.splits = np.cumsum([a.shape[-1] for a in arrays])[:-1]
        return np.concatenate(arrays, axis=-1)

    def backward(self, grad: np.ndarray):
        return tuple(np.split(grad, self.splits, axis=-1))


def concat_last_axis(tensors: Sequence[Tensor]) -> Tensor:
    return ConcatLastAxis.apply(*tensors)


class LabelSmoothedCrossEntropy(Function):
    def forward(self, logits: np.ndarray, targets: np.ndarray, valid: np.ndarray, epsilon: float) -> np.ndarray:
        vocab = logits.shape[-1]
        flat = logits.reshape(-1, vocab)
        targets = targets.reshape(-1)
        valid = valid.reshape(-1).astype(bool)
        if flat.shape[0] != targets.shape[0]:
            raise DimensionError(f"logits {logits.shape} do not match targets {targets.shape}")
        n_valid = int(valid.sum())
        if n_valid == 0:
            raise DefinednessError("cross entropy over zero valid positions")
        picked = targets[valid]
        if picked.min() < 0 or picked.max() >= vocab:
            raise ContractError(f"target index outside [0, {vocab})")

        shifted = flat - flat.max(axis=-1, keepdims=True)
        log_z = np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
        log_probs = shifted - log_z
        rows = np.arange(flat.shape[0])
        safe_targets = np.where(valid, targets, 0)
        nll = -log_probs[rows, safe_targets]
        if epsilon:
            smooth = -log_probs.mean(axis=-1)
            per_position = (1.0 - epsilon) * nll + epsilon * smooth
        else:
            per_position = nll

        target_dist = np.zeros_like(flat)
        target_dist[rows, safe_targets] = 1.0 - epsilon
        target_dist += epsilon / vocab
        self.grad_logits = (np.exp(log_probs) - target_dist) * valid[:, None] / n_valid
        self.shape = logits.shape
        return np.asarray(per_position[valid].sum() / n_valid, dtype=logits.dtype)

    def backward(self, grad: np.ndarray):
        return ((self.grad_logits * grad).reshape(self.shape),)


def cross_entropy_label_smoothed(
    logits: Tensor,
    targets: np.ndarray,
    epsilon: float = 0.1,
    valid: Optional[np.ndarray] = None,
) -> Tensor:
    """Mean label-smoothed NLL over valid positions.

    The target distribution puts 1 - epsilon on the reference token and spreads
    epsilon uniformly over the whole vocabulary.
    """
    if not 0.0 <= epsilon < 1.0:
        raise ParameterError(f"label smoothing must lie in [0, 1), got {epsilon}")
    targets = np.asarray(targets, dtype=np.int64)
    if valid is None:
        valid = np.ones(targets.shape, dtype=bool)
    return LabelSmoothedCrossEntropy.apply(logits, targets=targets, valid=np.asarray(valid), epsilon=epsilon)


class AttentionCrossEntropy(Function):
    """-sum(G^p * log A) / normalizer with a log floor on A."""

    def forward(self, attn: np.ndarray, target: np.ndarray, normalizer: float) -> np.ndarray:
        if attn.shape != target.shape:
            raise DimensionError(f"attention {attn.shape} and label matrix {target.shape} differ")
        floored = np.maximum(attn, LOG_FLOOR)
        self.scale = target / floored * (attn > LOG_FLOOR) / normalizer
        loss = -(target * np.log(floored)).sum() / normalizer
        return np.asarray(loss, dtype=attn.dtype)

    def backward(self, grad: np.ndarray):
        return (-self.scale * grad,)


def attention_cross_entropy(attn: Tensor, target: np.ndarray, normalizer: float) -> Tensor:
    if normalizer <= 0:
        raise DefinednessError("alignment loss normalizer must be positive")
    return AttentionCrossEntropy.apply(attn, target=np.asarray(target, dtype=attn.dtype), normalizer=float(normalizer))
