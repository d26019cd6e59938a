"""Tests for ALNF checkpoints and checkpoint averaging."""

import json
import struct
from collections import OrderedDict

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import array_shapes, arrays

from alignment_pipeline.checkpoint import (
    MAGIC,
    average_checkpoints,
    average_states,
    decode_checkpoint,
    encode_checkpoint,
    load_model,
    read_checkpoint,
    read_sidecar,
    save_model,
    write_checkpoint,
)
from alignment_pipeline.errors import FormatError, ParameterError
from alignment_pipeline.models import ModelConfig
from alignment_pipeline.transformer import Batch, Transformer


def _state():
    return OrderedDict(
        [
            ("embed.weight", np.arange(12, dtype=np.float32).reshape(3, 4)),
            ("scalar", np.array(2.5, dtype=np.float32)),
            ("bias", np.array([-1.0, 0.5], dtype=np.float32)),
        ]
    )


def _model(seed: int = 1) -> Transformer:
    return Transformer(ModelConfig(d_emb=8, n_layers=1, n_heads=2, d_ff=16, dropout=0.0, max_positions=16), 9, seed=seed)


states = st.dictionaries(
    st.text(min_size=1, max_size=12),
    arrays(np.float32, array_shapes(min_dims=0, max_dims=3, min_side=0, max_side=4), elements=st.floats(width=32, allow_nan=False)),
    min_size=1,
    max_size=5,
)


class TestEncoding:
    def test_round_trip_preserves_order_and_shapes(self):
        decoded = decode_checkpoint(encode_checkpoint(_state()))
        assert list(decoded) == ["embed.weight", "scalar", "bias"]
        for name, value in _state().items():
            assert decoded[name].shape == value.shape
            np.testing.assert_array_equal(decoded[name], value)

    @settings(max_examples=1000, deadline=None)
    @given(states)
    def test_random_states_round_trip(self, state):
        decoded = decode_checkpoint(encode_checkpoint(state))
        assert list(decoded) == list(state)
        for name, value in state.items():
            assert decoded[name].shape == value.shape
            assert decoded[name].tobytes() == value.astype("<f4").tobytes()

    def test_header(self):
        data = encode_checkpoint(_state())
        assert data[:4] == MAGIC
        assert struct.unpack_from("<I", data, 4) == (1,)

    def test_bad_magic(self):
        with pytest.raises(FormatError):
            decode_checkpoint(b"NOPE" + encode_checkpoint(_state())[4:])

    def test_unsupported_version(self):
        data = bytearray(encode_checkpoint(_state()))
        data[4:8] = struct.pack("<I", 99)
        with pytest.raises(FormatError):
            decode_checkpoint(bytes(data))

    def test_truncated(self):
        data = encode_checkpoint(_state())
        with pytest.raises(FormatError):
            decode_checkpoint(data[:-3])

    def test_duplicate_names(self):
        state = _state()
        data = encode_checkpoint(state)
        single = encode_checkpoint(OrderedDict([("bias", state["bias"])]))[8:]
        with pytest.raises(FormatError):
            decode_checkpoint(data + single)

    def test_file_round_trip(self, tmp_path):
        write_checkpoint(tmp_path / "m.alnf", _state())
        np.testing.assert_array_equal(read_checkpoint(tmp_path / "m.alnf")["bias"], [-1.0, 0.5])


class TestModelFiles:
    def test_save_and_load_model(self, tmp_path):
        model = _model()
        path = tmp_path / "m.alnf"
        save_model(model, path, seed=1, extra={"marker": "@@"})
        loaded = load_model(path)
        batch = Batch.from_pairs([[4, 5]], [[6, 7, 8]])
        np.testing.assert_array_equal(model.forward(batch).logits.data, loaded.forward(batch).logits.data)
        assert read_sidecar(path)["marker"] == "@@"

    def test_missing_sidecar(self, tmp_path):
        write_checkpoint(tmp_path / "m.alnf", _model().state_dict())
        with pytest.raises(FormatError):
            load_model(tmp_path / "m.alnf")

    def test_invalid_sidecar(self, tmp_path):
        path = tmp_path / "m.alnf"
        save_model(_model(), path)
        path.with_suffix(".json").write_text(json.dumps({"vocab_size": 9}), encoding="utf-8")
        with pytest.raises(FormatError):
            load_model(path)

    def test_architecture_mismatch(self, tmp_path):
        path = tmp_path / "m.alnf"
        save_model(_model(), path)
        write_checkpoint(path, _state())
        with pytest.raises(FormatError):
            load_model(path)


class TestAveraging:
    def test_mean_of_states(self):
        a = OrderedDict([("w", np.array([1.0, 2.0], dtype=np.float32))])
        b = OrderedDict([("w", np.array([3.0, 6.0], dtype=np.float32))])
        np.testing.assert_allclose(average_states([a, b])["w"], [2.0, 4.0])

    def test_mismatched_names(self):
        with pytest.raises(FormatError):
            average_states([{"w": np.zeros(2)}, {"v": np.zeros(2)}])

    def test_mismatched_shapes(self):
        with pytest.raises(FormatError):
            average_states([{"w": np.zeros(2)}, {"w": np.zeros(3)}])

    def test_empty(self):
        with pytest.raises(ParameterError):
            average_states([])

    def test_average_last_k_checkpoints(self, tmp_path):
        paths = []
        for seed in (1, 2, 3):
            path = tmp_path / f"m_epoch{seed:03d}.alnf"
            save_model(_model(seed), path)
            paths.append(path)
        averaged = average_checkpoints(paths, 2)
        expected = average_states([read_checkpoint(p) for p in paths[1:]])
        for name, value in averaged.state_dict().items():
            np.testing.assert_allclose(value, expected[name], rtol=1e-6)

    def test_average_needs_checkpoints(self):
        with pytest.raises(ParameterError):
            average_checkpoints([], 3)
