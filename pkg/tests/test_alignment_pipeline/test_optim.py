"""Tests for Adam and the inverse square root schedule."""

import numpy as np
import pytest

from alignment_pipeline.errors import ParameterError, TrainingError
from alignment_pipeline.optim import Adam, inverse_sqrt_lr
from alignment_pipeline.tensor import default_dtype, parameter


class TestInverseSqrtSchedule:
    def test_zero_before_first_step(self):
        assert inverse_sqrt_lr(1.0, 0, 4) == 0.0

    def test_linear_warmup(self):
        assert inverse_sqrt_lr(1.0, 1, 4) == pytest.approx(0.25)
        assert inverse_sqrt_lr(1.0, 2, 4) == pytest.approx(0.5)

    def test_peak_at_warmup(self):
        assert inverse_sqrt_lr(2e-3, 4, 4) == pytest.approx(2e-3)

    def test_decay_after_warmup(self):
        assert inverse_sqrt_lr(1.0, 16, 4) == pytest.approx(0.5)
        assert inverse_sqrt_lr(1.0, 64, 4) == pytest.approx(0.25)

    def test_no_warmup_is_constant(self):
        assert inverse_sqrt_lr(0.1, 1000, 0) == 0.1


class TestAdam:
    def test_matches_hand_recurrence(self):
        grads = [np.array([0.5, -1.0]), np.array([0.1, 0.3]), np.array([-0.2, 0.0])]
        lr, b1, b2, eps = 0.01, 0.9, 0.98, 1e-8
        with default_dtype(np.float64):
            w = parameter([1.0, -2.0])
            opt = Adam([("w", w)], lr=lr, warmup_steps=0, betas=(b1, b2), eps=eps)
            expected = np.array([1.0, -2.0])
            m = np.zeros(2)
            v = np.zeros(2)
            for t, g in enumerate(grads, start=1):
                w.grad = g.copy()
                used = opt.step()
                m = b1 * m + (1 - b1) * g
                v = b2 * v + (1 - b2) * g * g
                expected = expected - lr * (m / (1 - b1 ** t)) / (np.sqrt(v / (1 - b2 ** t)) + eps)
                assert used == lr
                np.testing.assert_allclose(w.data, expected, rtol=1e-12, atol=1e-15)

    def test_step_returns_scheduled_rate(self):
        w = parameter([0.0])
        opt = Adam([("w", w)], lr=0.1, warmup_steps=4)
        w.grad = np.array([1.0], dtype=np.float32)
        assert opt.step() == pytest.approx(0.025)
        assert opt.state.step == 1

    def test_missing_gradient_counts_as_zero(self):
        w = parameter([1.0, 2.0])
        opt = Adam([("w", w)], lr=0.1, warmup_steps=0)
        opt.step()
        np.testing.assert_array_equal(w.data, [1.0, 2.0])

    def test_clipping_scales_moments(self):
        with default_dtype(np.float64):
            w = parameter([0.0, 0.0])
            opt = Adam([("w", w)], lr=0.1, warmup_steps=0, betas=(0.9, 0.98), clip_norm=1.0)
            w.grad = np.array([3.0, 4.0])
            assert opt.global_grad_norm() == pytest.approx(5.0)
            opt.step()
        np.testing.assert_allclose(opt.state.first_moment["w"], 0.1 * np.array([0.6, 0.8]), rtol=1e-6)

    def test_no_clipping_below_threshold(self):
        with default_dtype(np.float64):
            w = parameter([0.0, 0.0])
            opt = Adam([("w", w)], lr=0.1, warmup_steps=0, clip_norm=10.0)
            w.grad = np.array([3.0, 4.0])
            opt.step()
        np.testing.assert_allclose(opt.state.first_moment["w"], 0.1 * np.array([3.0, 4.0]))

    def test_non_finite_gradient_raises(self):
        w = parameter([1.0, 2.0])
        opt = Adam([("layer.w", w)], lr=0.1, warmup_steps=0)
        w.grad = np.array([np.nan, 0.0], dtype=np.float32)
        with pytest.raises(TrainingError) as info:
            opt.step()
        assert info.value.parameter == "layer.w"
        np.testing.assert_array_equal(w.data, [1.0, 2.0])
        assert opt.state.step == 0

    def test_zero_grad_clears(self):
        w = parameter([1.0])
        opt = Adam([("w", w)])
        w.grad = np.array([1.0], dtype=np.float32)
        opt.zero_grad()
        assert w.grad is None

    def test_rejects_non_positive_lr(self):
        with pytest.raises(ParameterError):
            Adam([("w", parameter([1.0]))], lr=0.0)
