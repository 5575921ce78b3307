# Copyright (C) 2025 spikefp contributors
#
# SPDX-License-Identifier: MIT

import functools
from typing import List

import numpy as np
import numpy.typing as npt

from spikefp.data_structures import PrecisionFormat


def f32(*values: float) -> npt.NDArray[np.uint32]:
    """
    FP32 bit patterns of the given values.
    """
    return np.array(values, dtype=np.float32).view(np.uint32)


def random_patterns(fmt: PrecisionFormat, n: int, seed: int = 0) -> npt.NDArray:
    rng = np.random.default_rng(seed)
    return rng.integers(0, 1 << fmt.bit_width, size=n, dtype=np.uint64).astype(fmt.uint_dtype)


def normal_f32(n: int, seed: int = 0, scale: float = 1.0) -> npt.NDArray[np.float32]:
    rng = np.random.default_rng(seed)
    return rng.normal(0.0, scale, size=n).astype(np.float32)


@functools.cache
def fp8_pairs() -> List[npt.NDArray[np.uint8]]:
    """
    Every pair of FP8 bit patterns (65536 pairs).
    """
    a, b = np.meshgrid(np.arange(256, dtype=np.uint8), np.arange(256, dtype=np.uint8), indexing="ij")
    return [a.reshape(-1), b.reshape(-1)]


def special_patterns(fmt: PrecisionFormat) -> npt.NDArray:
    """
    Zeros, infinities, a NaN, the smallest denormals and the largest finite values.
    """
    inf = fmt.positive_inf
    patterns = [
        0,
        fmt.sign_mask,
        inf,
        inf | fmt.sign_mask,
        fmt.canonical_nan,
        1,
        1 | fmt.sign_mask,
        inf - 1,
        (inf - 1) | fmt.sign_mask,
        fmt.mantissa_mask,
        1 << fmt.mantissa_bits,
    ]
    return np.array(patterns, dtype=np.uint64).astype(fmt.uint_dtype)
