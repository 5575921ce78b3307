# Copyright (C) 2025 spikefp contributors
#
# SPDX-License-Identifier: MIT

import dataclasses
import functools
import hashlib
import importlib.resources
import pathlib
from typing import Dict, Mapping, Optional, Tuple

import numpy as np


@dataclasses.dataclass(frozen=True)
class PolynomialSpec:
    """
    An FP32 polynomial evaluated with Horner's scheme.

    coefficients are FP32 bit patterns ordered from the highest degree term down.
    """

    name: str
    coefficients: Tuple[int, ...]
    range_reduction_constants: Mapping[str, int] = dataclasses.field(default_factory=dict)

    def __post_init__(self):
        if len(self.coefficients) == 0:
            raise ValueError("a polynomial needs at least one coefficient")
        for c in self.coefficients:
            if not 0 <= c < 1 << 32:
                raise ValueError(f"coefficient {c:#x} is not a FP32 bit pattern")

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    def values(self) -> np.ndarray:
        return np.array(self.coefficients, dtype=np.uint32).view(np.float32)


def _default_path() -> pathlib.Path:
    return pathlib.Path(str(importlib.resources.files("spikefp.data").joinpath("polynomials.tsv")))


def parse_constants(text: str) -> Dict[str, int]:
    """
    Parse a table of FP32 constants and validate its checksum.

    Parameters
    ----------
    text
        the file content: tab-separated name, hex pattern and decimal value columns.
        Comment lines start with #. The "# sha256:" comment must hold the digest of all data lines.

    Returns
    -------
    Dict[str, int]
        a mapping from constant names to FP32 bit patterns
    """
    digest = None
    body = []
    constants = {}
    for line in text.splitlines():
        if line.startswith("#"):
            if line.startswith("# sha256:"):
                digest = line.split(":", 1)[1].strip()
            continue
        if len(line.strip()) == 0:
            continue
        body.append(line)
        toks = line.split("\t")
        if len(toks) < 2:
            raise RuntimeError(f'malformed constant line "{line}"')
        name, pattern = toks[0], int(toks[1], 16)
        if name in constants:
            raise RuntimeError(f'constant "{name}" is defined more than once')
        constants[name] = pattern

    if digest is None:
        raise RuntimeError("constant table has no checksum")
    found = hashlib.sha256("".join(f"{line}\n" for line in body).encode()).hexdigest()
    if found != digest:
        raise RuntimeError(f"constant table checksum mismatch: expected {digest}, found {found}")
    return constants


@functools.cache
def load_constants(path: Optional[pathlib.Path] = None) -> Dict[str, int]:
    if path is None:
        path = _default_path()
    return parse_constants(pathlib.Path(path).read_text())


def constant(name: str) -> int:
    try:
        return load_constants()[name]
    except KeyError:
        raise KeyError(f'unknown constant "{name}"') from None


def constant_f32(name: str) -> np.float32:
    return np.array([constant(name)], dtype=np.uint32).view(np.float32)[0]


def exp_polynomial() -> PolynomialSpec:
    """
    e^r ~ 1 + r + r^2 * P(r) on |r| <= ln2 / 2, with P of degree 4 (a degree 6 approximation of e^r).
    """
    return PolynomialSpec(
        "exp",
        tuple(constant(f"exp.c{i}") for i in range(6, 1, -1)),
        {k: constant(f"exp.{k}") for k in ("inv_ln2", "ln2_hi", "ln2_lo")},
    )


def sin_polynomial() -> PolynomialSpec:
    # sin(r) ~ r + r * z * S(z), z = r^2
    return PolynomialSpec(
        "sin",
        tuple(constant(f"sin.s{i}") for i in (2, 1, 0)),
        {k: constant(f"trig.{k}") for k in ("four_over_pi", "dp1", "dp2", "dp3")},
    )


def cos_polynomial() -> PolynomialSpec:
    # cos(r) ~ 1 - z / 2 + z * z * C(z), z = r^2
    return PolynomialSpec(
        "cos",
        tuple(constant(f"cos.c{i}") for i in (2, 1, 0)),
        {k: constant(f"trig.{k}") for k in ("four_over_pi", "dp1", "dp2", "dp3")},
    )
