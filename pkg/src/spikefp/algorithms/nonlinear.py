# Copyright (C) 2025 spikefp contributors
#
# SPDX-License-Identifier: MIT

"""
Transcendental and activation functions composed from FP32 spiking arithmetic.

Every intermediate value is an IEEE-754 FP32 word produced by the circuits in fparith,
so the results agree bit-for-bit with the same decomposition evaluated in host FP32 arithmetic
(see spikefp.algorithms.reference).
"""

from typing import Optional, Sequence, Tuple

import numpy as np

from spikefp.algorithms.fparith import FpUnit, tensor_to_word, word_to_tensor
from spikefp.algorithms.gates import mux_, or_, xor_
from spikefp.algorithms.intarith import add, increment, sign_extend, zero_extend
from spikefp.algorithms.polynomials import (
    PolynomialSpec,
    constant,
    cos_polynomial,
    exp_polynomial,
    sin_polynomial,
)
from spikefp.data_structures import (
    BitPlaneTensor,
    BitWord,
    GateNetlist,
    PrecisionFormat,
    concat,
)

# signed width of the integer k in e^x = 2^k * e^r (k is in [-150, 129])
_EXP_K_BITS = 10
# |x| * 4 / pi must fit in this many bits
_TRIG_J_BITS = 24
# low mantissa bits cleared to split a FP32 value for an exact product
_SPLIT_BITS = 12


def _require_fp32(unit: FpUnit):
    if unit.format != PrecisionFormat.FP32:
        raise ValueError(f"nonlinear circuits require FP32 operands (found {unit.format.name})")


def _k(unit: FpUnit, name: str) -> BitWord:
    return unit.const(constant(name))


def _horner(unit: FpUnit, poly: PolynomialSpec, x: BitWord) -> BitWord:
    p = unit.const(poly.coefficients[0])
    for coef in poly.coefficients[1:]:
        p = unit.add(unit.mul(p, x), unit.const(coef))
    return p


def _force_nan(unit: FpUnit, cond: BitWord, x: BitWord) -> BitWord:
    return mux_(unit.circuit, cond, unit.const(unit.format.canonical_nan), x)


def _flip_sign(unit: FpUnit, x: BitWord, flip: BitWord) -> BitWord:
    n = unit.format.bit_width
    return concat([x[: n - 1], xor_(unit.circuit, x[n - 1], flip)])


def exp_word(unit: FpUnit, x: BitWord) -> BitWord:
    """
    e^x = 2^k * e^r with k = floor(x / ln2 + 1/2) and r = x - k * ln2.

    ln2 is split in a high and a low part so that k * ln2_hi is exact.
    The final scaling by 2^k adds k to the exponent of e^r with an integer adder.
    """
    _require_fp32(unit)
    c = unit.circuit
    poly = exp_polynomial()

    # inputs outside of [lo, hi] overflow or underflow anyway
    lo, hi = _k(unit, "exp.clamp_lo"), _k(unit, "exp.clamp_hi")
    lt, _, _ = unit.compare(x, lo)
    xc = mux_(c, lt, lo, x)
    gt, _, _ = unit.compare(hi, xc)
    xc = mux_(c, gt, hi, xc)

    t = unit.add(unit.mul(xc, _k(unit, "exp.inv_ln2")), _k(unit, "exp.half"))
    k = unit.to_int(t, _EXP_K_BITS)
    kf = unit.from_int(k)
    r_hi = unit.sub(xc, unit.mul(kf, _k(unit, "exp.ln2_hi")))
    p = unit.mul(kf, _k(unit, "exp.ln2_lo"))
    r = unit.sub(r_hi, p)
    r_lo = unit.sub(unit.sub(r_hi, r), p)

    # e^r = 1 + r + r^2 g(r) evaluated as head + tail, with head = 1 + r
    y = unit.mul(_horner(unit, poly, r), unit.mul(r, r))
    one = unit.const_float(1.0)
    head = unit.add(r, one)
    err = unit.add(unit.sub(one, head), r)
    tail = unit.add(err, unit.add(y, unit.mul(r_lo, head)))
    y = unit.add(head, tail)

    fy = unit.fields(y)
    e, _ = add(c, zero_extend(c, fy.exp_eff, unit.exp_width), sign_extend(k, unit.exp_width))
    out = unit.round_pack(c.zeros(1), e, concat([c.zeros(3), fy.sig, c.zeros(1)]))
    return _force_nan(unit, unit.fields(x).nan, out)


def sigmoid_word(unit: FpUnit, x: BitWord) -> BitWord:
    one = unit.const_float(1.0)
    return unit.div(one, unit.add(exp_word(unit, unit.neg(x)), one))


def tanh_word(unit: FpUnit, x: BitWord) -> BitWord:
    two = unit.const_float(2.0)
    s = sigmoid_word(unit, unit.mul(x, two))
    return unit.sub(unit.mul(s, two), unit.const_float(1.0))


def silu_word(unit: FpUnit, x: BitWord) -> BitWord:
    return unit.mul(x, sigmoid_word(unit, x))


def _gelu_argument(unit: FpUnit, x: BitWord) -> Tuple[BitWord, BitWord]:
    """
    1.702 x as z + z_lo: the rounding error of the product is recovered by splitting x and alpha
    in 12-bit halves, and the representation error of alpha is added back.
    """
    z = unit.mul(x, _k(unit, "gelu.alpha"))
    a1, a2 = _k(unit, "gelu.alpha_hi"), _k(unit, "gelu.alpha_lo")
    x1 = concat([unit.circuit.zeros(_SPLIT_BITS), x[_SPLIT_BITS:]])
    x2 = unit.sub(x, x1)
    err = unit.sub(unit.mul(x1, a1), z)
    err = unit.add(err, unit.mul(x2, a1))
    err = unit.add(err, unit.mul(x1, a2))
    err = unit.add(err, unit.mul(x2, a2))
    return z, unit.add(err, unit.mul(x, _k(unit, "gelu.alpha_tail")))


def gelu_word(unit: FpUnit, x: BitWord) -> BitWord:
    c = unit.circuit
    n = unit.format.bit_width
    z, z_lo = _gelu_argument(unit, x)
    e = exp_word(unit, unit.neg(z))
    # e^(-z - z_lo) ~ e^(-z) (1 - z_lo) while e^(-z) is finite and non-zero
    ok, _, _ = unit.compare(concat([z[: n - 1], c.zeros(1)]), _k(unit, "gelu.clamp"))
    e = mux_(c, ok, unit.sub(e, unit.mul(e, z_lo)), e)
    one = unit.const_float(1.0)
    return unit.mul(x, unit.div(one, unit.add(e, one)))


def sincos_word(unit: FpUnit, x: BitWord) -> Tuple[BitWord, BitWord]:
    """
    Sine and cosine with an octant reduction by pi/4 in three parts.
    """
    _require_fp32(unit)
    c = unit.circuit
    n = unit.format.bit_width
    sp, cp = sin_polynomial(), cos_polynomial()
    fx = unit.fields(x)

    ax = concat([x[: n - 1], c.zeros(1)])
    j = unit.to_int(unit.mul(ax, _k(unit, "trig.four_over_pi")), _TRIG_J_BITS)
    j, _ = increment(c, j)
    j = concat([c.zeros(1), j[1:]])
    y = unit.from_int(j)

    r = unit.sub(ax, unit.mul(y, _k(unit, "trig.dp1")))
    r = unit.sub(r, unit.mul(y, _k(unit, "trig.dp2")))
    r = unit.sub(r, unit.mul(y, _k(unit, "trig.dp3")))
    z = unit.mul(r, r)

    ys = unit.add(unit.mul(unit.mul(_horner(unit, sp, z), z), r), r)
    yc = unit.mul(unit.mul(_horner(unit, cp, z), z), z)
    yc = unit.add(unit.sub(yc, unit.mul(unit.const_float(0.5), z)), unit.const_float(1.0))

    b1, b2 = j[1], j[2]
    s = _flip_sign(unit, mux_(c, b1, yc, ys), xor_(c, fx.sign, b2))
    co = _flip_sign(unit, mux_(c, b1, ys, yc), xor_(c, b1, b2))

    bad = or_(c, fx.inf, fx.nan)
    return _force_nan(unit, bad, s), _force_nan(unit, bad, co)


def _columns(x: BitWord, rows: int, cols: int) -> Sequence[BitWord]:
    return [x.take(np.arange(rows) * cols + j) for j in range(cols)]


def fold_sum(unit: FpUnit, terms: Sequence[BitWord], order: str = "ascending") -> BitWord:
    """
    Sequential sum of words: ((t0 + t1) + t2) + ... (or the mirrored sequence when order is "reversed").
    """
    if len(terms) == 0:
        raise ValueError("cannot sum an empty sequence")
    if order not in {"ascending", "reversed"}:
        raise ValueError(f'unknown accumulation order "{order}"')
    seq = list(terms) if order == "ascending" else list(terms)[::-1]
    acc = seq[0]
    for t in seq[1:]:
        acc = unit.add(acc, t)
    return acc


def softmax_word(unit: FpUnit, x: BitWord, rows: int, cols: int, order: str = "ascending") -> BitWord:
    """
    Row-wise softmax of a row-major (rows, cols) matrix laid out across lanes.
    """
    _require_fp32(unit)
    if rows < 1 or cols < 1:
        raise ValueError("softmax requires at least one row with at least one element")
    x = x.broadcast(rows * cols)
    row_of = np.repeat(np.arange(rows), cols)

    cs = _columns(x, rows, cols)
    m = cs[0]
    for col in cs[1:]:
        m = unit.max(m, col)

    e = exp_word(unit, unit.sub(x, m.take(row_of)))
    s = fold_sum(unit, _columns(e, rows, cols), order)
    return unit.div(e, s.take(row_of))


def _unit_for(x: BitPlaneTensor, netlist: Optional[GateNetlist]) -> FpUnit:
    c = GateNetlist(lanes=x.n_elements) if netlist is None else netlist
    return FpUnit(c, x.format)


def _apply(fn, x: BitPlaneTensor, netlist: Optional[GateNetlist]) -> BitPlaneTensor:
    unit = _unit_for(x, netlist)
    out = fn(unit, tensor_to_word(unit.circuit, x))
    return word_to_tensor(x.format, out.broadcast(x.n_elements), x.shape)


def fp_exp(x: BitPlaneTensor, netlist: Optional[GateNetlist] = None) -> BitPlaneTensor:
    return _apply(exp_word, x, netlist)


def fp_sigmoid(x: BitPlaneTensor, netlist: Optional[GateNetlist] = None) -> BitPlaneTensor:
    return _apply(sigmoid_word, x, netlist)


def fp_tanh(x: BitPlaneTensor, netlist: Optional[GateNetlist] = None) -> BitPlaneTensor:
    return _apply(tanh_word, x, netlist)


def fp_silu(x: BitPlaneTensor, netlist: Optional[GateNetlist] = None) -> BitPlaneTensor:
    return _apply(silu_word, x, netlist)


def fp_gelu(x: BitPlaneTensor, netlist: Optional[GateNetlist] = None) -> BitPlaneTensor:
    return _apply(gelu_word, x, netlist)


def fp_sincos(x: BitPlaneTensor, netlist: Optional[GateNetlist] = None) -> Tuple[BitPlaneTensor, BitPlaneTensor]:
    unit = _unit_for(x, netlist)
    s, co = sincos_word(unit, tensor_to_word(unit.circuit, x))
    n = x.n_elements
    return word_to_tensor(x.format, s.broadcast(n), x.shape), word_to_tensor(x.format, co.broadcast(n), x.shape)


def fp_softmax(x: BitPlaneTensor, netlist: Optional[GateNetlist] = None) -> BitPlaneTensor:
    """
    Numerically stable softmax over the last axis.

    Parameters
    ----------
    x
        a FP32 tensor holding a single row (1D) or a batch of rows (2D)
    netlist
        the netlist where the circuit is built. A fresh netlist is used when not provided.

    Returns
    -------
    BitPlaneTensor
        a tensor with the same shape as x
    """
    if len(x.shape) not in {1, 2}:
        raise ValueError("softmax requires a 1D or 2D tensor")
    rows, cols = (1, x.shape[0]) if len(x.shape) == 1 else x.shape
    if rows == 0 or cols == 0:
        raise ValueError("softmax rows cannot be empty")
    unit = _unit_for(x, netlist)
    out = softmax_word(unit, tensor_to_word(unit.circuit, x), rows, cols)
    return word_to_tensor(x.format, out.broadcast(x.n_elements), x.shape)
