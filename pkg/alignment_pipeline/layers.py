"""Parameter containers: a small module system over ``Tensor``."""

from __future__ import annotations

from typing import Dict, Iterator, List, Tuple

import numpy as np

from . import functional as F
from .errors import FormatError
from .tensor import Tensor, get_default_dtype, parameter


class Module:
    """Collects parameters from attributes (tensors, modules and lists of modules)."""

    training: bool = True

    def named_parameters(self, prefix: str = "") -> List[Tuple[str, Tensor]]:
        seen: Dict[int, str] = {}
        out: List[Tuple[str, Tensor]] = []
        for name, p in self._walk(prefix):
            if id(p) in seen:
                continue
            seen[id(p)] = name
            out.append((name, p))
        return out

    def _walk(self, prefix: str) -> Iterator[Tuple[str, Tensor]]:
        for attr, value in vars(self).items():
            full = f"{prefix}{attr}"
            if isinstance(value, Tensor) and value.requires_grad:
                yield full, value
            elif isinstance(value, Module):
                yield from value._walk(full + ".")
            elif isinstance(value, list):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item._walk(f"{full}.{i}.")

    def parameters(self) -> List[Tensor]:
        return [p for _, p in self.named_parameters()]

    def state_dict(self) -> Dict[str, np.ndarray]:
        return {name: p.data for name, p in self.named_parameters()}

    def load_state_dict(self, state: Dict[str, np.ndarray]) -> None:
        params = dict(self.named_parameters())
        missing = sorted(set(params) - set(state))
        unexpected = sorted(set(state) - set(params))
        if missing or unexpected:
            raise FormatError(f"parameter names differ: missing {missing}, unexpected {unexpected}")
        for name, p in params.items():
            value = state[name]
            if value.shape != p.data.shape:
                raise FormatError(f"parameter {name!r} has shape {value.shape}, expected {p.data.shape}")
            p.data[...] = value

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.zero_grad()

    def train(self, mode: bool = True) -> "Module":
        for module in self._modules():
            module.training = mode
        return self

    def eval(self) -> "Module":
        return self.train(False)

    def _modules(self) -> Iterator["Module"]:
        yield self
        for value in vars(self).values():
            if isinstance(value, Module):
                yield from value._modules()
            elif isinstance(value, list):
                for item in value:
                    if isinstance(item, Module):
                        yield from item._modules()


class Linear(Module):
    def __init__(self, d_in: int, d_out: int, rng: np.random.Generator, bias: bool = True):
        bound = 1.0 / np.sqrt(d_in)
        dtype = get_default_dtype()
        self.weight = parameter(rng.uniform(-bound, bound, size=(d_in, d_out)).astype(dtype))
        self.bias = parameter(np.zeros(d_out, dtype=dtype)) if bias else None

    def __call__(self, x: Tensor) -> Tensor:
        out = F.matmul(x, self.weight)
        return out + self.bias if self.bias is not None else out


class LayerNorm(Module):
    def __init__(self, d: int, eps: float = 1e-5):
        dtype = get_default_dtype()
        self.gamma = parameter(np.ones(d, dtype=dtype))
        self.beta = parameter(np.zeros(d, dtype=dtype))
        self.eps = eps

    def __call__(self, x: Tensor) -> Tensor:
        return F.layer_norm(x, self.gamma, self.beta, self.eps)


class Embedding(Module):
    def __init__(self, vocab_size: int, d: int, rng: np.random.Generator, padding_idx: int = 0):
        weight = rng.normal(0.0, d ** -0.5, size=(vocab_size, d)).astype(get_default_dtype())
        weight[padding_idx] = 0.0
        self.weight = parameter(weight)

    def __call__(self, indices: np.ndarray) -> Tensor:
        return F.embedding_lookup(self.weight, indices)


class FeedForward(Module):
    def __init__(self, d: int, d_ff: int, rng: np.random.Generator):
        self.fc1 = Linear(d, d_ff, rng)
        self.fc2 = Linear(d_ff, d, rng)

    def __call__(self, x: Tensor, p: float, rng: np.random.Generator) -> Tensor:
        hidden = F.dropout(F.relu(self.fc1(x)), p, rng, self.training)
        return self.fc2(hidden)
