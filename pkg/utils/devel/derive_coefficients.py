#!/usr/bin/env python3

# Copyright (C) 2025 spikefp contributors
#
# SPDX-License-Identifier: MIT

import argparse
import hashlib
import logging
import math
import pathlib
import struct
import sys
from fractions import Fraction
from typing import Dict, List, Sequence, Tuple

import numpy as np

HEADER = (
    "# FP32 constants of the polynomial approximations used by spikefp.algorithms.nonlinear.",
    "# Columns: name, IEEE-754 bit pattern, decimal value (informative only: the bit pattern is authoritative).",
    "# Regenerate with utils/devel/derive_coefficients.py",
)

# series terms used for pi and ln2: far beyond what a FP32 rounding can observe
_SERIES_TERMS = 60

# |r| bound of the exponential reduction, slightly above ln2 / 2 to cover the rounding of k
EXP_INTERVAL = Fraction(45, 128)
# z = r^2 bound of the trigonometric reduction, slightly above (pi / 4)^2
TRIG_INTERVAL = Fraction(5, 8)

GELU_ALPHA = Fraction(1702, 1000)


def make_cli() -> argparse.ArgumentParser:
    cli = argparse.ArgumentParser(
        "Script to derive the FP32 constant table used by the nonlinear circuits with exact rational arithmetic."
    )

    cli.add_argument(
        "table",
        type=pathlib.Path,
        help="Path to the constant table (e.g. src/spikefp/data/polynomials.tsv).",
    )
    cli.add_argument(
        "--check",
        action="store_true",
        default=False,
        help="Compare the derived table with the existing file instead of overwriting it.",
    )
    cli.add_argument(
        "--samples",
        type=int,
        default=100_000,
        help="Number of points used to estimate the approximation error of each polynomial.",
    )
    cli.add_argument(
        "--verbosity",
        type=str,
        choices=["debug", "info", "warning", "error", "critical"],
        default="info",
        help="Set verbosity of output to the console.",
    )

    return cli


def setup_logger(level: str):
    fmt = "[%(asctime)s] %(levelname)s: %(message)s"
    logging.basicConfig(level=level, format=fmt)
    logging.getLogger().setLevel(level)


def _arctan_inv(n: int) -> Fraction:
    # arctan(1 / n)
    return sum((Fraction((-1) ** k, (2 * k + 1) * n ** (2 * k + 1)) for k in range(_SERIES_TERMS)), Fraction(0))


def _arctanh_inv(n: int) -> Fraction:
    # arctanh(1 / n)
    return sum((Fraction(1, (2 * k + 1) * n ** (2 * k + 1)) for k in range(_SERIES_TERMS)), Fraction(0))


def pi_over_4() -> Fraction:
    return 4 * _arctan_inv(5) - _arctan_inv(239)


def ln2() -> Fraction:
    return 2 * _arctanh_inv(3)


def round_f32(v: Fraction) -> int:
    """
    Round a rational to the nearest normal FP32 value (ties to even) and return its bit pattern.
    """
    if v == 0:
        return 0
    sign = 0x80000000 if v < 0 else 0
    v = abs(v)
    e = v.numerator.bit_length() - v.denominator.bit_length()
    while v >= Fraction(2) ** (e + 1):
        e += 1
    while v < Fraction(2) ** e:
        e -= 1

    scaled = v * Fraction(2) ** (23 - e)
    m = math.floor(scaled)
    rem = scaled - m
    if rem > Fraction(1, 2) or (rem == Fraction(1, 2) and m % 2 == 1):
        m += 1
    if m == 1 << 24:
        m >>= 1
        e += 1
    if not -126 <= e <= 127:
        raise ValueError(f"{float(v)} is outside of the FP32 normal range")
    return sign | ((e + 127) << 23) | (m - (1 << 23))


def f32_value(pattern: int) -> Fraction:
    return Fraction(struct.unpack("<f", struct.pack("<I", pattern))[0])


def _binomial_expand(coefficients: Sequence[Fraction], shift: Fraction, scale: Fraction) -> List[Fraction]:
    # coefficients of p(shift + scale * t) in t, lowest degree first
    out = [Fraction(0)] * len(coefficients)
    for i, a in enumerate(coefficients):
        for j in range(i + 1):
            out[j] += a * math.comb(i, j) * shift ** (i - j) * scale**j
    return out


def _chebyshev_basis(n: int) -> List[List[int]]:
    basis = [[1], [0, 1]]
    while len(basis) <= n:
        prev, last = basis[-2], basis[-1]
        nxt = [0] + [2 * c for c in last]
        for i, c in enumerate(prev):
            nxt[i] -= c
        basis.append(nxt)
    return basis[: n + 1]


def economize(coefficients: Sequence[Fraction], lo: Fraction, hi: Fraction, degree: int) -> List[Fraction]:
    """
    Lower the degree of a polynomial on [lo, hi] by dropping its highest Chebyshev terms.

    Parameters
    ----------
    coefficients
        the monomial coefficients, lowest degree first
    lo, hi
        the approximation interval
    degree
        the degree of the result

    Returns
    -------
    List[Fraction]
        the monomial coefficients of the economized polynomial, lowest degree first
    """
    n = len(coefficients) - 1
    if not 0 <= degree <= n:
        raise ValueError(f"cannot economize a degree {n} polynomial to degree {degree}")
    mid, half = (lo + hi) / 2, (hi - lo) / 2
    basis = _chebyshev_basis(n)

    t_coef = _binomial_expand(coefficients, mid, half)
    cheb = [Fraction(0)] * (n + 1)
    for k in range(n, -1, -1):
        cheb[k] = t_coef[k] / basis[k][k]
        for i, c in enumerate(basis[k]):
            t_coef[i] -= cheb[k] * c

    kept = [Fraction(0)] * (degree + 1)
    for k in range(degree + 1):
        for i, c in enumerate(basis[k]):
            kept[i] += cheb[k] * c
    return _binomial_expand(kept, -mid / half, 1 / half)


def _taylor(term, count: int) -> List[Fraction]:
    return [term(j) for j in range(count)]


def derive_constants() -> List[Tuple[str, int]]:
    """
    Compute every constant of the table in table order.
    """
    l2, p4 = ln2(), pi_over_4()
    one = Fraction(1)

    ln2_hi = Fraction(round(l2 * 512), 512)
    constants = [
        ("exp.clamp_lo", round_f32(Fraction(-104))),
        ("exp.clamp_hi", round_f32(Fraction(89))),
        ("exp.inv_ln2", round_f32(one / l2)),
        ("exp.half", round_f32(Fraction(1, 2))),
        ("exp.ln2_hi", round_f32(ln2_hi)),
        ("exp.ln2_lo", round_f32(l2 - ln2_hi)),
    ]

    # e^r = 1 + r + r^2 g(r), g_j = 1 / (j + 2)!
    g = _taylor(lambda j: Fraction(1, math.factorial(j + 2)), 7)
    g = economize(g, -EXP_INTERVAL, EXP_INTERVAL, 4)
    constants += [(f"exp.c{j + 2}", round_f32(g[j])) for j in range(4, -1, -1)]

    dp1 = Fraction(math.floor(p4 * 256), 256)
    dp2 = Fraction(math.floor((p4 - dp1) * 2**24), 2**24)
    constants += [
        ("trig.four_over_pi", round_f32(one / p4)),
        ("trig.dp1", round_f32(dp1)),
        ("trig.dp2", round_f32(dp2)),
        ("trig.dp3", round_f32(p4 - dp1 - dp2)),
    ]

    # sin(r) = r + r z S(z) and cos(r) = 1 - z / 2 + z^2 C(z), z = r^2
    s = _taylor(lambda j: Fraction((-1) ** (j + 1), math.factorial(2 * j + 3)), 4)
    c = _taylor(lambda j: Fraction((-1) ** j, math.factorial(2 * j + 4)), 4)
    s = economize(s, Fraction(0), TRIG_INTERVAL, 2)
    c = economize(c, Fraction(0), TRIG_INTERVAL, 2)
    constants += [(f"sin.s{j}", round_f32(s[j])) for j in (2, 1, 0)]
    constants += [(f"cos.c{j}", round_f32(c[j])) for j in (2, 1, 0)]

    # alpha_hi keeps 12 significant bits, so products with 12-bit halves are exact
    alpha = round_f32(GELU_ALPHA)
    alpha_hi = alpha & 0xFFFFF000
    constants += [
        ("gelu.alpha", alpha),
        ("gelu.alpha_hi", alpha_hi),
        ("gelu.alpha_lo", round_f32(f32_value(alpha) - f32_value(alpha_hi))),
        ("gelu.alpha_tail", round_f32(GELU_ALPHA - f32_value(alpha))),
        ("gelu.clamp", round_f32(Fraction(88))),
    ]
    return constants


def checksum(body: List[str]) -> str:
    return hashlib.sha256("".join(f"{line}\n" for line in body).encode()).hexdigest()


def render_table(constants: Sequence[Tuple[str, int]]) -> str:
    body = [f"{name}\t0x{pattern:08X}\t{float(f32_value(pattern)):.10E}" for name, pattern in constants]
    return "".join(f"{line}\n" for line in [*HEADER, *body, f"# sha256: {checksum(body)}"])


def horner(coefficients: List[np.float64], x: np.ndarray) -> np.ndarray:
    acc = np.zeros_like(x)
    for c in coefficients:
        acc = acc * x + c
    return acc


def report_errors(constants: Dict[str, int], samples: int):
    values = {k: np.float64(float(f32_value(v))) for k, v in constants.items()}

    bound = float(EXP_INTERVAL)
    r = np.linspace(-bound, bound, samples)
    p = horner([values[f"exp.c{i}"] for i in range(6, 1, -1)], r)
    err = np.abs((1 + r + r * r * p) - np.exp(r)) / np.exp(r)
    logging.info("exp: max relative error %.3e on [-%.4f, %.4f]", err.max(), bound, bound)

    r = np.linspace(-np.pi / 4, np.pi / 4, samples)
    z = r * r
    s = r + r * z * horner([values[f"sin.s{i}"] for i in (2, 1, 0)], z)
    c = 1 - z / 2 + z * z * horner([values[f"cos.c{i}"] for i in (2, 1, 0)], z)
    logging.info("sin: max absolute error %.3e on [-pi/4, pi/4]", np.abs(s - np.sin(r)).max())
    logging.info("cos: max absolute error %.3e on [-pi/4, pi/4]", np.abs(c - np.cos(r)).max())

    split = values["trig.dp1"] + values["trig.dp2"] + values["trig.dp3"]
    logging.info("trig: |dp1 + dp2 + dp3 - pi/4| = %.3e", abs(split - np.pi / 4))


def main() -> int:
    args = vars(make_cli().parse_args())
    setup_logger(args["verbosity"].upper())

    path = args["table"]
    constants = derive_constants()
    report_errors(dict(constants), args["samples"])
    table = render_table(constants)

    if not args["check"]:
        path.write_text(table)
        logging.info('wrote %d constants to "%s"', len(constants), path)
        return 0

    if not path.is_file() or path.read_text() != table:
        logging.critical('"%s" is missing or out of date: rerun without --check', path)
        return 1

    logging.info("### SUCCESS!")
    return 0


if __name__ == "__main__":
    sys.exit(main())
