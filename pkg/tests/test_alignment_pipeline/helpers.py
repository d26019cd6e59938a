"""Shared fixtures for the alignment pipeline tests."""

from __future__ import annotations

from typing import Callable, Iterable, Optional, Tuple

import numpy as np

from alignment_pipeline.models import ExperimentConfig
from alignment_pipeline.tensor import Tensor, default_dtype, parameter


def numeric_gradient(
    fn: Callable[[np.ndarray], float],
    array: np.ndarray,
    h: float = 1e-6,
    indices: Optional[Iterable[Tuple[int, ...]]] = None,
) -> np.ndarray:
    """Central differences of ``fn`` at ``array``; entries outside ``indices`` stay zero."""
    grad = np.zeros_like(array, dtype=np.float64)
    for idx in (indices if indices is not None else np.ndindex(array.shape)):
        original = array[idx]
        array[idx] = original + h
        plus = fn(array)
        array[idx] = original - h
        minus = fn(array)
        array[idx] = original
        grad[idx] = (plus - minus) / (2 * h)
    return grad


def max_relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-6) -> float:
    """||a - n|| / max(||a|| + ||n||, floor)."""
    analytic = np.asarray(analytic, dtype=np.float64).ravel()
    numeric = np.asarray(numeric, dtype=np.float64).ravel()
    denom = max(np.linalg.norm(analytic) + np.linalg.norm(numeric), floor)
    return float(np.linalg.norm(analytic - numeric) / denom)


def check_gradients(build: Callable[..., Tensor], *arrays: np.ndarray, h: float = 1e-6, rtol: float = 1e-5, atol: float = 1e-7) -> None:
    """Compare autodiff gradients of the scalar ``build(*tensors)`` with central differences, in float64."""
    with default_dtype(np.float64):
        arrays = tuple(np.array(a, dtype=np.float64) for a in arrays)
        params = [parameter(a.copy()) for a in arrays]
        build(*params).backward()
        for k, p in enumerate(params):

            def fn(x: np.ndarray, k: int = k) -> float:
                inputs = [Tensor(x if m == k else arrays[m]) for m in range(len(arrays))]
                return build(*inputs).item()

            numeric = numeric_gradient(fn, arrays[k].copy(), h)
            np.testing.assert_allclose(p.grad, numeric, rtol=rtol, atol=atol)


def tiny_config(**overrides) -> ExperimentConfig:
    """A model small enough to train in seconds on a few dozen sentences."""
    values = {
        "name": "tiny",
        "seed": 7,
        "bidirectional": False,
        "model": {"d_emb": 16, "n_layers": 2, "n_heads": 2, "d_ff": 32, "dropout": 0.0, "max_positions": 64},
        "training": {
            "epochs": 2,
            "max_tokens": 200,
            "lr": 3e-3,
            "warmup_steps": 10,
            "validation_fraction": 0.0,
            "average_last": 2,
        },
        "bpe": {"merges": 20},
        "aligner": {"ibm1_iterations": 3, "hmm_iterations": 2},
    }
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(values.get(key), dict):
            values[key] = {**values[key], **value}
        else:
            values[key] = value
    return ExperimentConfig(**values)
