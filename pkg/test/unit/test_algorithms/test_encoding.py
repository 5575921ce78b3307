# Copyright (C) 2025 spikefp contributors
#
# SPDX-License-Identifier: MIT

import math

import numpy as np
import pytest
from test_helpers_patterns import f32, normal_f32, random_patterns

from spikefp.algorithms.encoding import (
    RATE_RANGE,
    TTFS_RANGE,
    decode,
    decode_patterns,
    encode,
    patterns_to_float,
    quantize,
    rate_decode,
    rate_encode,
    rate_roundtrip,
    sample_benchmark_inputs,
    truncate_patterns,
    ttfs_decode,
    ttfs_encode,
    ttfs_roundtrip,
)
from spikefp.data_structures import PrecisionFormat

FP8 = PrecisionFormat.FP8_E4M3
FP16 = PrecisionFormat.FP16
FP32 = PrecisionFormat.FP32
FP64 = PrecisionFormat.FP64


@pytest.mark.unit
class TestSpatialEncoding:
    def test_roundtrip_patterns(self):
        for fmt in PrecisionFormat:
            patterns = random_patterns(fmt, 1000, seed=fmt.bit_width)
            assert (decode_patterns(encode(patterns, fmt)) == patterns).all()

    def test_roundtrip_values(self):
        x = np.concatenate([normal_f32(100), np.array([0.0, -0.0, np.inf, -np.inf, 1e-45], dtype=np.float32)])
        spikes = encode(x, FP32)
        assert spikes.planes.shape == (32, 105)
        assert (decode(spikes).view(np.uint32) == x.view(np.uint32)).all()

    def test_nan_payload(self):
        patterns = np.array([0x7FC00001, 0xFF800123], dtype=np.uint32)
        assert (encode(patterns, FP32).patterns() == patterns).all()

    def test_shape(self):
        x = np.arange(12, dtype=np.float64).reshape(3, 4)
        spikes = encode(x, FP16)
        assert spikes.shape == (3, 4)
        assert (decode(spikes) == x).all()

    def test_one(self):
        spikes = encode(np.array([1.0], dtype=np.float32), FP32)
        assert spikes.planes[:, 0].astype(int).tolist() == [0, 0] + [1] * 7 + [0] * 23

    def test_not_representable(self):
        with pytest.raises(ValueError, match="not exactly representable"):
            encode(np.array([0.1]), FP16)
        with pytest.raises(ValueError, match="do not fit in 8 bits"):
            encode(np.array([256], dtype=np.uint16), FP8)


@pytest.mark.unit
class TestFp8:
    def test_quantize(self):
        values = [1.0, -0.0, 240.0, 248.0, 2.0**-9, 2.0**-6, 1.0625, 1.1875, 1.96875, math.nan]
        expected = [0x38, 0x80, 0x77, 0x78, 0x01, 0x08, 0x38, 0x3A, 0x40, 0x7C]
        assert quantize(values, FP8).tolist() == expected

    def test_exhaustive_roundtrip(self):
        patterns = np.arange(256, dtype=np.uint8)
        values = patterns_to_float(patterns, FP8)
        nan = np.isnan(values)
        assert np.count_nonzero(nan) == 14
        assert (quantize(values[~nan], FP8) == patterns[~nan]).all()

    def test_special_values(self):
        values = patterns_to_float(np.array([0x78, 0xF8, 0x7F, 0x77, 0x01], dtype=np.uint8), FP8)
        assert values[0] == np.inf
        assert values[1] == -np.inf
        assert np.isnan(values[2])
        assert values[3] == 240.0
        assert values[4] == 2.0**-9


@pytest.mark.unit
class TestTruncation:
    def test_keep_top_bits(self):
        assert truncate_patterns(f32(1.0), FP32, 32).tolist() == [0x3F800000]
        assert truncate_patterns([0x3F8FFFFF], FP32, 16).tolist() == [0x3F8F0000]
        assert truncate_patterns([0xFFFFFFFF], FP32, 0).tolist() == [0]

    def test_invalid_channels(self):
        with pytest.raises(ValueError, match="channels must be between 0 and 32"):
            truncate_patterns([0], FP32, 33)


@pytest.mark.unit
class TestTemporalEncoding:
    def test_rate(self):
        train = rate_encode(RATE_RANGE, 64, rng_seed=0)
        assert train.steps == 64
        assert train.spikes.sum() == 64
        assert rate_decode(train) == RATE_RANGE

        assert rate_decode(rate_encode(0.0, 64, rng_seed=0)) == 0.0
        assert rate_decode(rate_encode(-2 * RATE_RANGE, 8, rng_seed=0)) == -RATE_RANGE

    def test_rate_is_seeded(self):
        a = rate_encode(1234.0, 256, rng_seed=7)
        b = rate_encode(1234.0, 256, rng_seed=7)
        assert (a.spikes == b.spikes).all()

    def test_rate_roundtrip(self):
        y = rate_roundtrip([0.0, RATE_RANGE, -RATE_RANGE], 16, np.random.default_rng(0))
        assert y.tolist() == [0.0, RATE_RANGE, -RATE_RANGE]

    def test_ttfs(self):
        train = ttfs_encode(0.0, 16)
        assert train.spikes.sum() == 1
        assert train.spikes.argmax() == 8
        assert ttfs_decode(train) == 637.5

        assert ttfs_encode(-TTFS_RANGE, 16).spikes.argmax() == 0
        assert ttfs_encode(TTFS_RANGE, 16).spikes.argmax() == 15

    def test_ttfs_roundtrip(self):
        x = np.array([-9999.0, -10.0, 0.0, 123.0, 9999.0])
        expected = [ttfs_decode(ttfs_encode(v, 32)) for v in x]
        assert ttfs_roundtrip(x, 32).tolist() == expected

    def test_invalid_steps(self):
        with pytest.raises(ValueError, match="steps must be a positive integer"):
            rate_encode(1.0, 0, rng_seed=0)
        with pytest.raises(ValueError, match="steps must be a positive integer"):
            ttfs_roundtrip([1.0], 0)

    def test_benchmark_inputs(self):
        x = sample_benchmark_inputs(10_000, np.random.default_rng(0))
        assert x.dtype == np.float32
        assert np.abs(x).max() <= TTFS_RANGE
        assert 50 < x.std() < 150

    @pytest.mark.parametrize(
        "scheme, steps, expected, rel",
        [
            ("rate", 32, 4.46e4, 0.1),
            ("ttfs", 32, 6.03e4, 0.1),
            ("rate", 16, 7.70e4, 0.25),
            ("ttfs", 16, 3.68e5, 0.25),
        ],
    )
    def test_reference_errors(self, scheme, steps, expected, rel):
        x = sample_benchmark_inputs(10_000, np.random.default_rng(0)).astype(np.float64)
        if scheme == "rate":
            y = rate_roundtrip(x, steps, np.random.default_rng(1))
        else:
            y = ttfs_roundtrip(x, steps)
        assert np.mean((y - x) ** 2) == pytest.approx(expected, rel=rel)

    def test_ttfs_fine_bins(self):
        # bins much narrower than the input spread: uniform quantization error
        x = sample_benchmark_inputs(10_000, np.random.default_rng(0)).astype(np.float64)
        width = 2 * TTFS_RANGE / 1024
        mse = np.mean((ttfs_roundtrip(x, 1024) - x) ** 2)
        assert mse == pytest.approx(width**2 / 12, rel=0.1)
