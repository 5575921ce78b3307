# Copyright (C) 2025 spikefp contributors
#
# SPDX-License-Identifier: MIT

import dataclasses

import numpy as np
import numpy.typing as npt

from spikefp.data_structures import BitPlaneTensor, PrecisionFormat

# Symmetric ranges [-scale, scale] covered by the rate and TTFS encoders.
# On N(0, sigma^2) inputs a rate train of T steps has MSE (scale * E|x| - sigma^2) / T, and a TTFS
# train with bins much wider than sigma has MSE E[(|x| - scale / T)^2]. With sigma = 100 and T = 32
# these ranges give 4.46e4 and 6.07e4.
RATE_RANGE = 1.8e4
TTFS_RANGE = 1.02e4


def _fp8_to_float(patterns: npt.NDArray) -> npt.NDArray[np.float64]:
    fmt = PrecisionFormat.FP8_E4M3
    p = np.asarray(patterns).astype(np.int64)
    sign = np.where(p & fmt.sign_mask, -1.0, 1.0)
    exp = (p >> fmt.mantissa_bits) & ((1 << fmt.exponent_bits) - 1)
    man = p & fmt.mantissa_mask

    normal = np.ldexp(1.0 + man / 8.0, exp - fmt.bias)
    denormal = np.ldexp(man / 8.0, 1 - fmt.bias)
    out = np.where(exp == 0, denormal, normal)
    out = np.where((exp == 15) & (man == 0), np.inf, out)
    out = np.where((exp == 15) & (man != 0), np.nan, out)
    return sign * out


def _float_to_fp8(values: npt.NDArray) -> npt.NDArray[np.uint8]:
    """
    Round float64 values to FP8 E4M3 (IEEE layout) with round-to-nearest-even.
    """
    fmt = PrecisionFormat.FP8_E4M3
    x = np.asarray(values, dtype=np.float64)
    sign = np.signbit(x).astype(np.int64) << 7
    a = np.abs(x)

    with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
        _, e = np.frexp(np.where(np.isfinite(a) & (a > 0), a, 1.0))
        e = np.maximum(e - 1, 1 - fmt.bias)
        quantum = np.ldexp(1.0, e - fmt.mantissa_bits)
        v = np.rint(a / quantum) * quantum

        _, e2 = np.frexp(np.where(v > 0, v, 1.0))
        e2 = e2 - 1
        is_normal = v >= np.ldexp(1.0, 1 - fmt.bias)
        biased = np.where(is_normal, e2 + fmt.bias, 0)
        man = np.where(
            is_normal,
            np.rint((v / np.ldexp(1.0, e2) - 1.0) * 8.0),
            np.rint(v / np.ldexp(1.0, 1 - fmt.bias - fmt.mantissa_bits)),
        ).astype(np.int64)

    pattern = (biased.astype(np.int64) << fmt.mantissa_bits) | man
    # the largest finite value is 240: anything at or above the midpoint to 256 overflows
    pattern = np.where(a >= 248.0, fmt.positive_inf, pattern)
    pattern = sign | pattern
    pattern = np.where(np.isnan(x), fmt.canonical_nan, pattern)
    return pattern.astype(np.uint8)


def quantize(values: npt.ArrayLike, fmt: PrecisionFormat) -> npt.NDArray:
    """
    Round real values to the given format (round-to-nearest-even) and return their bit patterns.
    """
    x = np.asarray(values, dtype=np.float64)
    if fmt == PrecisionFormat.FP8_E4M3:
        return _float_to_fp8(x)
    with np.errstate(over="ignore"):
        return x.astype(fmt.float_dtype).view(fmt.uint_dtype)


def patterns_to_float(patterns: npt.ArrayLike, fmt: PrecisionFormat) -> npt.NDArray:
    """
    Reinterpret bit patterns as floating-point values. FP8 values are widened to float64.
    """
    p = np.asarray(patterns)
    if fmt == PrecisionFormat.FP8_E4M3:
        return _fp8_to_float(p)
    return p.astype(fmt.uint_dtype).view(fmt.float_dtype)


def encode(values: npt.ArrayLike, fmt: PrecisionFormat) -> BitPlaneTensor:
    """
    Map each value to bit_width parallel spike channels by bit reinterpretation.

    Parameters
    ----------
    values
        the values to encode. Arrays of unsigned integers are interpreted as raw bit patterns.
        Floating-point arrays must hold values that are exactly representable in the target format.
    fmt
        the precision format

    Returns
    -------
    BitPlaneTensor
        the spatial encoding of values: plane i of element j holds bit (width - 1 - i) of values[j]
    """
    values = np.asarray(values)
    if np.issubdtype(values.dtype, np.unsignedinteger):
        if values.size != 0 and int(values.max()) >> fmt.bit_width != 0:
            raise ValueError(f"bit patterns do not fit in {fmt.bit_width} bits")
        return BitPlaneTensor.from_patterns(fmt, values)

    if values.dtype == fmt.float_dtype and fmt != PrecisionFormat.FP8_E4M3:
        return BitPlaneTensor.from_patterns(fmt, values.view(fmt.uint_dtype))

    patterns = quantize(values, fmt)
    roundtrip = patterns_to_float(patterns, fmt).astype(np.float64)
    x = values.astype(np.float64)
    if not np.all((roundtrip == x) | (np.isnan(roundtrip) & np.isnan(x))):
        raise ValueError(f"values are not exactly representable in {fmt.name}")
    return BitPlaneTensor.from_patterns(fmt, patterns)


def decode(spikes: BitPlaneTensor) -> npt.NDArray:
    """
    Exact inverse of encode: rebuild the values from their spike channels.
    FP8 values are returned as float64 numbers, so use decode_patterns() to inspect NaN payloads.
    """
    return patterns_to_float(spikes.patterns(), spikes.format)


def decode_patterns(spikes: BitPlaneTensor) -> npt.NDArray:
    return spikes.patterns()


def truncate_patterns(patterns: npt.ArrayLike, fmt: PrecisionFormat, channels: int) -> npt.NDArray:
    """
    Keep the top `channels` bits of each pattern and zero the rest.
    """
    if not 0 <= channels <= fmt.bit_width:
        raise ValueError(f"channels must be between 0 and {fmt.bit_width}")
    p = np.asarray(patterns).astype(np.uint64)
    keep = ((1 << channels) - 1) << (fmt.bit_width - channels)
    return (p & np.uint64(keep)).astype(fmt.uint_dtype)


@dataclasses.dataclass(frozen=True)
class SpikeTrain:
    """
    A spike train produced by the temporal (rate or TTFS) baseline encoders.
    """

    spikes: npt.NDArray[np.uint8]
    scale: float
    sign: int = 1

    @property
    def steps(self) -> int:
        return len(self.spikes)


def _check_steps(steps: int):
    if steps < 1:
        raise ValueError("steps must be a positive integer")


def rate_encode(value: float, steps: int, rng_seed: int, scale: float = RATE_RANGE) -> SpikeTrain:
    """
    Encode a value as Bernoulli spikes with firing probability clamp(|value| / scale, 0, 1).
    """
    _check_steps(steps)
    p = float(np.clip(abs(value) / scale, 0.0, 1.0))
    rng = np.random.default_rng(rng_seed)
    spikes = (rng.random(steps) < p).astype(np.uint8)
    return SpikeTrain(spikes, scale, -1 if value < 0 else 1)


def rate_decode(train: SpikeTrain) -> float:
    return float(train.sign * train.scale * np.count_nonzero(train.spikes) / train.steps)


def rate_roundtrip(values: npt.ArrayLike, steps: int, rng: np.random.Generator, scale: float = RATE_RANGE):
    """
    Vectorized rate encode + decode: spike counts are drawn as binomial variates.
    """
    _check_steps(steps)
    x = np.asarray(values, dtype=np.float64)
    p = np.clip(np.abs(x) / scale, 0.0, 1.0)
    counts = rng.binomial(steps, p)
    return np.sign(x) * scale * counts / steps


def _ttfs_bin(value: npt.ArrayLike, steps: int, scale: float) -> npt.NDArray[np.int64]:
    u = (np.asarray(value, dtype=np.float64) + scale) / (2 * scale)
    return np.clip(np.floor(u * steps), 0, steps - 1).astype(np.int64)


def ttfs_encode(value: float, steps: int, scale: float = TTFS_RANGE) -> SpikeTrain:
    """
    Encode a value as the latency of a single spike.
    Values are mapped from [-scale, scale] to [0, 1) before binning.
    """
    _check_steps(steps)
    spikes = np.zeros(steps, dtype=np.uint8)
    spikes[int(_ttfs_bin(value, steps, scale))] = 1
    return SpikeTrain(spikes, scale)


def ttfs_decode(train: SpikeTrain) -> float:
    (t,) = np.flatnonzero(train.spikes)
    return float(-train.scale + (t + 0.5) * 2 * train.scale / train.steps)


def ttfs_roundtrip(values: npt.ArrayLike, steps: int, scale: float = TTFS_RANGE):
    _check_steps(steps)
    t = _ttfs_bin(values, steps, scale)
    return -scale + (t + 0.5) * 2 * scale / steps


def sample_benchmark_inputs(n: int, rng: np.random.Generator, scale: float = TTFS_RANGE) -> npt.NDArray[np.float32]:
    """
    Draw the inputs of the encoding benchmark: N(0, 100^2) clipped to the smaller encoder range and rounded to FP32.
    """
    x = np.clip(rng.normal(0.0, 100.0, size=n), -scale, scale)
    return x.astype(np.float32)
