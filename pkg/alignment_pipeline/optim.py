"""Adam with an inverse square root learning-rate schedule."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import ParameterError, TrainingError
from .tensor import Tensor

logger = logging.getLogger(__name__)


def inverse_sqrt_lr(base_lr: float, step: int, warmup_steps: int) -> float:
    """Linear warmup to ``base_lr`` at ``warmup_steps``, then decay as step^-0.5."""
    if step <= 0:
        return 0.0
    if warmup_steps <= 0:
        return base_lr
    return base_lr * min(step ** -0.5, step * warmup_steps ** -1.5) * warmup_steps ** 0.5


@dataclass
class AdamState:
    lr: float = 3e-4
    warmup_steps: int = 4000
    beta1: float = 0.9
    beta2: float = 0.98
    eps: float = 1e-8
    step: int = 0
    first_moment: Dict[str, np.ndarray] = field(default_factory=dict)
    second_moment: Dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def effective_lr(self) -> float:
        return inverse_sqrt_lr(self.lr, self.step, self.warmup_steps)


class Adam:
    """Bias-corrected Adam over a list of named parameters.

    Gradients are never zeroed implicitly; call ``zero_grad`` between steps.
    """

    def __init__(
        self,
        named_params: Sequence[Tuple[str, Tensor]],
        lr: float = 3e-4,
        warmup_steps: int = 4000,
        betas: Tuple[float, float] = (0.9, 0.98),
        eps: float = 1e-8,
        clip_norm: Optional[float] = None,
    ):
        if lr <= 0:
            raise ParameterError(f"learning rate must be positive, got {lr}")
        self.params: List[Tuple[str, Tensor]] = list(named_params)
        self.clip_norm = clip_norm
        self.state = AdamState(lr=lr, warmup_steps=warmup_steps, beta1=betas[0], beta2=betas[1], eps=eps)
        for name, p in self.params:
            self.state.first_moment[name] = np.zeros_like(p.data)
            self.state.second_moment[name] = np.zeros_like(p.data)

    def zero_grad(self) -> None:
        for _, p in self.params:
            p.zero_grad()

    def global_grad_norm(self) -> float:
        total = 0.0
        for _, p in self.params:
            if p.grad is not None:
                total += float(np.sum(np.square(p.grad, dtype=np.float64)))
        return total ** 0.5

    def step(self) -> float:
        """Apply one update and return the learning rate that was used."""
        for name, p in self.params:
            if p.grad is not None and not np.all(np.isfinite(p.grad)):
                raise TrainingError(f"non-finite gradient in parameter {name!r}", parameter=name)

        scale = 1.0
        if self.clip_norm is not None:
            norm = self.global_grad_norm()
            if norm > self.clip_norm:
                scale = self.clip_norm / (norm + 1e-6)
                logger.debug("Clipping gradient norm %.4f to %.4f", norm, self.clip_norm)

        st = self.state
        st.step += 1
        lr = st.effective_lr
        bias1 = 1.0 - st.beta1 ** st.step
        bias2 = 1.0 - st.beta2 ** st.step
        for name, p in self.params:
            grad = p.grad if p.grad is not None else np.zeros_like(p.data)
            if scale != 1.0:
                grad = grad * scale
            m = st.first_moment[name]
            v = st.second_moment[name]
            m *= st.beta1
            m += (1.0 - st.beta1) * grad
            v *= st.beta2
            v += (1.0 - st.beta2) * grad * grad
            m_hat = m / bias1
            v_hat = v / bias2
            # in place so shared embeddings stay one buffer
            p.data -= (lr * m_hat / (np.sqrt(v_hat) + st.eps)).astype(p.data.dtype)
        return lr
