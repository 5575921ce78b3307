# Copyright (C) 2025 spikefp contributors
#
# SPDX-License-Identifier: MIT

import numpy as np
import pytest

from spikefp.data_structures import BlockWeights, LinearWeights, TransformerBlockConfig


@pytest.mark.unit
class TestLinearWeights:
    def test_invalid_params(self):
        with pytest.raises(ValueError, match="float32"):
            LinearWeights(np.zeros((2, 2)))
        with pytest.raises(ValueError, match="2 dimension"):
            LinearWeights(np.zeros(4, dtype=np.float32))
        with pytest.raises(ValueError, match="cannot be empty"):
            LinearWeights(np.zeros((0, 3), dtype=np.float32))
        with pytest.raises(ValueError, match="bias has 3 values, expected 2"):
            LinearWeights(np.zeros((2, 4), dtype=np.float32), np.zeros(3, dtype=np.float32))

    def test_shape(self):
        w = LinearWeights.random(3, 5, np.random.default_rng(0), bias=True)
        assert w.out_features == 3
        assert w.in_features == 5
        assert w.w.dtype == np.float32
        assert w.b.shape == (3,)
        assert LinearWeights.zeros(2, 2).b is None


@pytest.mark.unit
class TestTransformerBlockConfig:
    def test_invalid_params(self):
        with pytest.raises(ValueError, match="positive integer"):
            TransformerBlockConfig(d_model=0, n_heads=1, d_ff=4, seq_len=2)
        with pytest.raises(ValueError, match="divisible"):
            TransformerBlockConfig(d_model=8, n_heads=3, d_ff=4, seq_len=2)
        with pytest.raises(ValueError, match="head dimension must be even"):
            TransformerBlockConfig(d_model=6, n_heads=2, d_ff=4, seq_len=2)

    def test_eps(self):
        config = TransformerBlockConfig(d_model=8, n_heads=2, d_ff=32, seq_len=4)
        assert config.d_head == 4
        assert config.eps_value == np.float32(1e-6)


@pytest.mark.unit
class TestBlockWeights:
    def test_check(self):
        config = TransformerBlockConfig(d_model=8, n_heads=2, d_ff=32, seq_len=4)
        w = BlockWeights.random(config, np.random.default_rng(0))
        w.check(config)
        assert list(w.linear_layers()) == ["wq", "wk", "wv", "wo", "w_up", "w_down"]

        other = TransformerBlockConfig(d_model=8, n_heads=2, d_ff=16, seq_len=4)
        with pytest.raises(ValueError, match="w_up has shape"):
            BlockWeights.zeros(other).check(config)

    def test_residual_scale(self):
        config = TransformerBlockConfig(d_model=8, n_heads=2, d_ff=32, seq_len=4)
        w = BlockWeights.random(config, np.random.default_rng(3))
        scaled = BlockWeights.random(config, np.random.default_rng(3), residual_scale=0.5)
        assert np.array_equal(scaled.wq.w, w.wq.w)
        assert np.array_equal(scaled.wo.w, 0.5 * w.wo.w)
        assert np.array_equal(scaled.w_down.w, 0.5 * w.w_down.w)

        with pytest.raises(ValueError, match="residual_scale must be positive"):
            BlockWeights.random(config, np.random.default_rng(3), residual_scale=0.0)
