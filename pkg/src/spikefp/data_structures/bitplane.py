# Copyright (C) 2025 spikefp contributors
#
# SPDX-License-Identifier: MIT

import enum
from typing import Tuple

import numpy as np
import numpy.typing as npt


class PrecisionFormat(enum.Enum):
    """
    The IEEE-754 binary interchange formats supported by the spatial encoding.

    FP8_E4M3 follows the IEEE layout rules (an all-ones exponent encodes Inf and NaN).
    """

    FP8_E4M3 = "fp8"
    FP16 = "fp16"
    FP32 = "fp32"
    FP64 = "fp64"

    @staticmethod
    def from_name(name: str) -> "PrecisionFormat":
        key = name.strip().lower()
        for fmt in PrecisionFormat:
            if key in {fmt.value, fmt.name.lower()}:
                return fmt
        raise ValueError(f'unknown precision format "{name}"')

    @property
    def exponent_bits(self) -> int:
        return {"fp8": 4, "fp16": 5, "fp32": 8, "fp64": 11}[self.value]

    @property
    def mantissa_bits(self) -> int:
        return {"fp8": 3, "fp16": 10, "fp32": 23, "fp64": 52}[self.value]

    @property
    def bit_width(self) -> int:
        return 1 + self.exponent_bits + self.mantissa_bits

    @property
    def bias(self) -> int:
        return (1 << (self.exponent_bits - 1)) - 1

    @property
    def uint_dtype(self) -> np.dtype:
        return np.dtype(f"uint{self.bit_width}")

    @property
    def float_dtype(self) -> np.dtype:
        """
        The numpy dtype holding values of this format. FP8 has no native dtype and maps to float32.
        """
        return np.dtype({"fp8": "float32", "fp16": "float16", "fp32": "float32", "fp64": "float64"}[self.value])

    @property
    def sign_mask(self) -> int:
        return 1 << (self.bit_width - 1)

    @property
    def exponent_mask(self) -> int:
        return ((1 << self.exponent_bits) - 1) << self.mantissa_bits

    @property
    def mantissa_mask(self) -> int:
        return (1 << self.mantissa_bits) - 1

    @property
    def canonical_nan(self) -> int:
        """
        The bit pattern of the canonical quiet NaN
        """
        return self.exponent_mask | (1 << (self.mantissa_bits - 1))

    @property
    def positive_inf(self) -> int:
        return self.exponent_mask

    @property
    def hex_digits(self) -> int:
        return self.bit_width // 4

    def format_hex(self, pattern: int) -> str:
        return f"0x{int(pattern):0{self.hex_digits}X}"


class BitPlaneTensor(object):
    """
    A tensor of IEEE-754 values represented as parallel spike channels.

    Planes are stored MSB-first: plane 0 holds the sign bit of every element.
    """

    def __init__(self, fmt: PrecisionFormat, planes: npt.NDArray[np.bool_], shape: Tuple[int, ...] | None = None):
        """
        Parameters
        ----------
        fmt
            the precision format of the encoded values
        planes
            boolean array with shape (bit_width, n_elements)
        shape
            the logical shape of the tensor. Defaults to (n_elements,)
        """
        planes = np.asarray(planes)
        if planes.ndim != 2:
            raise ValueError("planes should be a 2D array")
        if planes.shape[0] != fmt.bit_width:
            raise ValueError(
                f"number of planes does not match the precision format: expected {fmt.bit_width}, found {planes.shape[0]}"
            )
        if planes.dtype != np.bool_:
            if not np.isin(planes, (0, 1)).all():
                raise ValueError("plane entries must be either 0 or 1")
            planes = planes.astype(bool)

        if shape is None:
            shape = (planes.shape[1],)
        if int(np.prod(shape, dtype=np.int64)) != planes.shape[1]:
            raise ValueError(f"shape {shape} is not compatible with {planes.shape[1]} elements")

        self._fmt = fmt
        self._planes = planes
        self._shape = tuple(int(x) for x in shape)

    def __repr__(self) -> str:
        return f"BitPlaneTensor(format={self._fmt.name}, shape={self._shape})"

    def __len__(self) -> int:
        return self.n_elements

    @property
    def format(self) -> PrecisionFormat:
        return self._fmt

    @property
    def planes(self) -> npt.NDArray[np.bool_]:
        return self._planes

    @property
    def shape(self) -> Tuple[int, ...]:
        return self._shape

    @property
    def n_elements(self) -> int:
        return self._planes.shape[1]

    @staticmethod
    def from_patterns(fmt: PrecisionFormat, patterns: npt.ArrayLike) -> "BitPlaneTensor":
        """
        Build a tensor from an array of unsigned integer bit patterns.
        """
        patterns = np.asarray(patterns)
        flat = patterns.reshape(-1).astype(np.uint64)
        shifts = np.arange(fmt.bit_width - 1, -1, -1, dtype=np.uint64)
        planes = ((flat[np.newaxis, :] >> shifts[:, np.newaxis]) & np.uint64(1)).astype(bool)
        return BitPlaneTensor(fmt, planes, patterns.shape)

    def patterns(self) -> npt.NDArray:
        """
        Return the bit patterns as unsigned integers with the tensor's logical shape.
        """
        weights = np.uint64(1) << np.arange(self._fmt.bit_width - 1, -1, -1, dtype=np.uint64)
        acc = np.zeros(self.n_elements, dtype=np.uint64)
        for plane, w in zip(self._planes, weights):
            acc |= np.where(plane, w, np.uint64(0))
        return acc.astype(self._fmt.uint_dtype).reshape(self._shape)

    def reshape(self, *shape: int) -> "BitPlaneTensor":
        return BitPlaneTensor(self._fmt, self._planes, shape)
