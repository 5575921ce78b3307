# Copyright (C) 2025 spikefp contributors
#
# SPDX-License-Identifier: MIT

"""
IEEE-754 arithmetic (round-to-nearest-even) built from integrate-and-fire gate circuits.

All pipelines are generic over FP8 (E4M3), FP16 and FP32.
Intermediate significands are kept in a datapath of M + 5 bits (M = mantissa bits):
bit 0 is the sticky bit, bit 1 the round bit, bit 2 the guard bit, bits 3..M+2 hold the
mantissa, bit M+3 the hidden bit and bit M+4 provides one bit of overflow headroom.
Exponents are handled as signed (two's complement) words of E + 3 bits.
"""

import functools
from typing import Dict, List, Optional, Tuple

import numpy as np

from spikefp.algorithms.encoding import quantize
from spikefp.algorithms.gates import and_, mux_, not_, or_, xor_
from spikefp.algorithms.intarith import (
    add,
    array_multiply,
    asr1,
    barrel_shift,
    compare,
    increment,
    is_zero,
    negate,
    normalize,
    reduce_and,
    reduce_or,
    shift_left_const,
    subtract,
    zero_extend,
)
from spikefp.data_structures import (
    BitPlaneTensor,
    BitWord,
    GateNetlist,
    PrecisionFormat,
    concat,
)

ARITHMETIC_FORMATS = (PrecisionFormat.FP8_E4M3, PrecisionFormat.FP16, PrecisionFormat.FP32)

# Fractional bits of the Newton-Raphson datapath in excess of the mantissa width
_NR_EXTRA_BITS = 10
_NR_ITERATIONS = 3
_HERON_ITERATIONS = 2
_RECIPROCAL_LUT_BITS = 8
_SQRT_LUT_BITS = 7


class FpFields(object):
    """
    The fields of a floating-point word together with its classification bits.
    """

    def __init__(self, unit: "FpUnit", x: BitWord):
        c, fmt = unit.circuit, unit.format
        m, e = fmt.mantissa_bits, fmt.exponent_bits

        self.word = x
        self.man = x[:m]
        self.exp = x[m : m + e]
        self.sign = x[m + e]

        self.exp_zero = is_zero(c, self.exp)
        exp_ones = reduce_and(c, self.exp)
        man_zero = is_zero(c, self.man)
        man_nonzero = not_(c, man_zero)

        self.zero = and_(c, self.exp_zero, man_zero)
        self.inf = and_(c, exp_ones, man_zero)
        self.nan = and_(c, exp_ones, man_nonzero)
        self.hidden = not_(c, self.exp_zero)
        # denormals share the exponent of the smallest normal number
        self.exp_eff = concat([or_(c, self.exp[0], self.exp_zero), self.exp[1:]]) if e > 1 else self.exp
        self.sig = concat([self.man, self.hidden])


class FpUnit(object):
    """
    A floating-point unit for one precision format, wired into a GateNetlist.

    Every operation creates new neurons in the netlist: the unit is a circuit builder.
    Operands and results are BitWords holding IEEE-754 bit patterns (LSB-first).
    """

    def __init__(self, circuit: GateNetlist, fmt: PrecisionFormat, div_correction: bool = True):
        """
        Parameters
        ----------
        circuit
            the netlist where neurons are created
        fmt
            the precision format. FP64 is not supported.
        div_correction
            whether division and square root should perform a final remainder-based correction step.
            Without correction, results are within 1 ULP of the correctly rounded value.
        """
        if fmt not in ARITHMETIC_FORMATS:
            raise ValueError(f"arithmetic circuits are not available for {fmt.name}")
        self._c = circuit
        self._fmt = fmt
        self._div_correction = div_correction

    @property
    def circuit(self) -> GateNetlist:
        return self._c

    @property
    def format(self) -> PrecisionFormat:
        return self._fmt

    @property
    def div_correction(self) -> bool:
        return self._div_correction

    @property
    def exp_width(self) -> int:
        """
        Width of the signed exponent words used inside the pipelines
        """
        return self._fmt.exponent_bits + 3

    def const(self, pattern: int) -> BitWord:
        return self._c.const(int(pattern), self._fmt.bit_width)

    def const_float(self, value: float) -> BitWord:
        return self.const(int(quantize(value, self._fmt)))

    def fields(self, x: BitWord) -> FpFields:
        if x.width != self._fmt.bit_width:
            raise ValueError(f"expected a {self._fmt.bit_width}-bit word, found {x.width} bits")
        return FpFields(self, x)

    def _sconst(self, value: int) -> BitWord:
        ew = self.exp_width
        return self._c.const(value % (1 << ew), ew)

    def _pack(self, sign: BitWord, exp: BitWord, man: BitWord) -> BitWord:
        return concat([man, exp, sign])

    def _special(self, result: BitWord, sign: BitWord, nan: BitWord, inf: BitWord, zero: Optional[BitWord] = None):
        c, fmt = self._c, self._fmt
        m, e = fmt.mantissa_bits, fmt.exponent_bits
        if zero is not None:
            result = mux_(c, zero, concat([c.zeros(m + e), sign]), result)
        result = mux_(c, inf, concat([c.zeros(m), c.const((1 << e) - 1, e), sign]), result)
        return mux_(c, nan, self.const(fmt.canonical_nan), result)

    def _collapse(self, p: BitWord) -> BitWord:
        """
        Compress a normalized significand (MSB = hidden bit) into the M + 5 bit rounding datapath.
        """
        c = self._c
        m = self._fmt.mantissa_bits
        if p.width < m + 4:
            p = concat([c.zeros(m + 4 - p.width), p])
        w = p.width
        sticky = reduce_or(c, p[: w - 3 - m]) if w - 3 - m > 0 else c.zeros(1)
        return concat([sticky, p[w - 3 - m], p[w - 2 - m], p[w - 1 - m :], c.zeros(1)])

    def round_pack(self, sign: BitWord, e: BitWord, t: BitWord) -> BitWord:
        """
        Normalize, round to nearest even and pack a result.

        Parameters
        ----------
        sign
            the sign bit of the result
        e
            the signed biased exponent corresponding to the hidden bit position of t
        t
            the significand in the M + 5 bit rounding datapath

        Returns
        -------
        BitWord
            the packed IEEE-754 bit pattern. Overflow produces a signed infinity.
        """
        c, fmt = self._c, self._fmt
        m, ew = fmt.mantissa_bits, self.exp_width
        emax = (1 << fmt.exponent_bits) - 1

        # 1. one position of overflow headroom
        ov = t[m + 4]
        shifted = concat([or_(c, t[0], t[1]), t[2:], c.zeros(1)])
        t = mux_(c, ov, shifted, t)
        e, _ = increment(c, e, ov)

        # 2. normalization
        tn, lz = normalize(c, t[: m + 4])
        e, _ = subtract(c, e, zero_extend(c, lz, ew))

        # 3. gradual underflow
        e_positive = and_(c, not_(c, e[-1]), not_(c, is_zero(c, e)))
        amount, _ = subtract(c, self._sconst(1), e)
        amount = and_(c, amount, not_(c, e_positive))
        tn, sticky = barrel_shift(c, tn, amount, "right")
        tn = concat([or_(c, tn[0], sticky), tn[1:]])

        # 4. round to nearest even
        lsb, guard, rnd, stk = tn[3], tn[2], tn[1], tn[0]
        round_up = and_(c, guard, or_(c, or_(c, rnd, stk), lsb))

        # 5. rounding may carry into the exponent field
        hidden = tn[m + 3]
        exp_field = and_(c, e[: fmt.exponent_bits], hidden)
        field, _ = increment(c, concat([tn[3 : m + 3], exp_field]), round_up)
        result = concat([field, sign])

        # 6. overflow
        diff, _ = subtract(c, e, self._sconst(emax))
        overflow = and_(c, not_(c, diff[-1]), hidden)
        inf = concat([c.zeros(m), c.const(emax, fmt.exponent_bits), sign])
        return mux_(c, overflow, inf, result)

    def neg(self, x: BitWord) -> BitWord:
        n = self._fmt.bit_width
        return concat([x[: n - 1], not_(self._c, x[n - 1])])

    def add(self, a: BitWord, b: BitWord) -> BitWord:
        c, fmt = self._c, self._fmt
        m, n = fmt.mantissa_bits, fmt.bit_width

        # 1. order operands by magnitude
        lt, _, _ = compare(c, a[: n - 1], b[: n - 1])
        both = mux_(c, lt, concat([b, a]), concat([a, b]))
        big, small = self.fields(both[:n]), self.fields(both[n:])

        # 2. align the smaller significand
        d, _ = subtract(c, big.exp_eff, small.exp_eff)
        t_big = concat([c.zeros(3), big.sig, c.zeros(1)])
        aligned, sticky = barrel_shift(c, concat([c.zeros(3), small.sig]), d, "right")
        t_small = concat([or_(c, aligned[0], sticky), aligned[1:], c.zeros(1)])

        # 3. add or subtract significands
        eff_sub = xor_(c, big.sign, small.sign)
        t_small = xor_(c, t_small, eff_sub)
        total, _ = add(c, t_big, t_small, eff_sub)

        sign = mux_(c, is_zero(c, total), and_(c, big.sign, small.sign), big.sign)
        result = self.round_pack(sign, zero_extend(c, big.exp_eff, self.exp_width), total)

        nan = or_(c, or_(c, big.nan, small.nan), and_(c, and_(c, big.inf, small.inf), eff_sub))
        return self._special(result, big.sign, nan, big.inf)

    def sub(self, a: BitWord, b: BitWord) -> BitWord:
        return self.add(a, self.neg(b))

    def mul(self, a: BitWord, b: BitWord) -> BitWord:
        c, fmt = self._c, self._fmt
        ew = self.exp_width
        fa, fb = self.fields(a), self.fields(b)

        p = array_multiply(c, fa.sig, fb.sig)
        pn, lz = normalize(c, p)

        e, _ = add(c, zero_extend(c, fa.exp_eff, ew), zero_extend(c, fb.exp_eff, ew))
        e, _ = subtract(c, e, self._sconst(fmt.bias - 1))
        e, _ = subtract(c, e, zero_extend(c, lz, ew))

        sign = xor_(c, fa.sign, fb.sign)
        result = self.round_pack(sign, e, self._collapse(pn))

        invalid = or_(c, and_(c, fa.inf, fb.zero), and_(c, fa.zero, fb.inf))
        nan = or_(c, or_(c, fa.nan, fb.nan), invalid)
        inf = or_(c, fa.inf, fb.inf)
        return self._special(result, sign, nan, inf)

    def _normalized_sig(self, f: FpFields) -> Tuple[BitWord, BitWord]:
        """
        Normalize denormal significands into [2^M, 2^(M+1)) and adjust the exponent accordingly.
        """
        c = self._c
        sig, lz = normalize(c, f.sig)
        e, _ = subtract(c, zero_extend(c, f.exp_eff, self.exp_width), zero_extend(c, lz, self.exp_width))
        return sig, e

    def _lut(self, index: BitWord, entries: List[int], width: int) -> BitWord:
        """
        Constant lookup table realized as a tree of word-level multiplexers (one level per index bit).
        """
        c = self._c
        level = [c.const(v, width) for v in entries]
        for k in range(index.width):
            odd = concat(level[1::2])
            even = concat(level[0::2])
            merged = mux_(c, index[k], odd, even)
            level = [merged[i * width : (i + 1) * width] for i in range(len(level) // 2)]
        return level[0]

    def _nr_reciprocal(self, b: BitWord, frac_bits: int, out_frac: int) -> BitWord:
        """
        Newton-Raphson reciprocal of a normalized fixed-point value.

        Parameters
        ----------
        b
            value in [1, 2) with frac_bits fractional bits (the MSB must be set)
        frac_bits
            number of fractional bits of b
        out_frac
            number of fractional bits of the result

        Returns
        -------
        BitWord
            an approximation of 1/b (never above the exact value) with out_frac fractional bits,
            out_frac + 1 bits wide
        """
        c = self._c
        k = min(_RECIPROCAL_LUT_BITS, frac_bits)
        x = self._lut(b[frac_bits - k : frac_bits], _reciprocal_lut(k, out_frac), out_frac + 1)

        full = frac_bits + out_frac
        for _ in range(_NR_ITERATIONS):
            t = array_multiply(c, b, x)
            u, _ = subtract(c, c.const(1 << (full + 1), full + 2), t[: full + 2])
            xu = array_multiply(c, x, u)
            x = xu[full : full + out_frac + 1]

        return x

    def _divide_sig(self, a_sig: BitWord, b_sig: BitWord) -> BitWord:
        """
        Divide two normalized significands.

        Returns
        -------
        BitWord
            the quotient in the rounding datapath, with the hidden bit at position M + 3
            (the quotient can be smaller than one, in which case bit M + 2 is set instead)
        """
        c = self._c
        m = self._fmt.mantissa_bits
        f = m + _NR_EXTRA_BITS

        x = self._nr_reciprocal(b_sig, m, f)
        ax = array_multiply(c, a_sig, x)
        q = ax[f - 3 : f + m + 2]

        if not self._div_correction:
            sticky = reduce_or(c, ax[: f - 3])
            return concat([or_(c, q[0], sticky), q[1:]])

        w = 2 * m + 6
        r, _ = subtract(c, zero_extend(c, shift_left_const(c, zero_extend(c, a_sig, w), m + 3), w), array_multiply(c, q, b_sig)[:w])
        r_minus_b, ge = subtract(c, r, zero_extend(c, b_sig, w))
        q, _ = increment(c, q, ge)
        r = mux_(c, ge, r_minus_b, r)
        sticky = not_(c, is_zero(c, r))
        return concat([or_(c, q[0], sticky), q[1:]])

    def div(self, a: BitWord, b: BitWord) -> BitWord:
        c, fmt = self._c, self._fmt
        fa, fb = self.fields(a), self.fields(b)

        a_sig, ea = self._normalized_sig(fa)
        b_sig, eb = self._normalized_sig(fb)
        e, _ = subtract(c, ea, eb)
        e, _ = add(c, e, self._sconst(fmt.bias))

        sign = xor_(c, fa.sign, fb.sign)
        result = self.round_pack(sign, e, self._divide_sig(a_sig, b_sig))

        nan = or_(c, or_(c, fa.nan, fb.nan), or_(c, and_(c, fa.zero, fb.zero), and_(c, fa.inf, fb.inf)))
        inf = or_(c, fa.inf, fb.zero)
        zero = or_(c, fa.zero, fb.inf)
        return self._special(result, sign, nan, inf, zero)

    def reciprocal(self, b: BitWord) -> BitWord:
        return self.div(self.const_float(1.0), b)

    def sqrt(self, a: BitWord) -> BitWord:
        c, fmt = self._c, self._fmt
        m = fmt.mantissa_bits
        f = m + _NR_EXTRA_BITS
        fa = self.fields(a)

        sig, e = self._normalized_sig(fa)
        u, _ = subtract(c, e, self._sconst(fmt.bias))
        par = u[0]
        e_out, _ = add(c, asr1(concat([c.zeros(1), u[1:]])), self._sconst(fmt.bias))

        # mantissa scaled to [1, 4) with m fractional bits
        scaled = mux_(c, par, concat([c.zeros(1), sig]), concat([sig, c.zeros(1)]))

        k = min(_SQRT_LUT_BITS, m)
        index = concat([sig[m - k : m], par])
        y = self._lut(index, _sqrt_lut(k, f), f + 1)

        for _ in range(_HERON_ITERATIONS):
            x = self._nr_reciprocal(y, f, f)
            z = array_multiply(c, scaled, x)[m : m + f + 2]
            total, carry = add(c, zero_extend(c, y, f + 2), z)
            y = concat([total, carry])[1 : f + 2]

        s = y[f - m - 3 :]
        if self._div_correction:
            s = self._correct_sqrt(scaled, s)
        else:
            s = concat([or_(c, s[0], reduce_or(c, y[: f - m - 3])), s[1:]])

        result = self.round_pack(c.zeros(1), e_out, concat([s, c.zeros(1)]) if s.width < m + 5 else s[: m + 5])

        nan = or_(c, fa.nan, and_(c, fa.sign, not_(c, fa.zero)))
        return self._special(result, fa.sign, nan, fa.inf, fa.zero)

    def _correct_sqrt(self, scaled: BitWord, s: BitWord) -> BitWord:
        """
        Turn an estimate s of floor(sqrt(N)), N = scaled * 2^(M+6), into the exact floor and fold the
        remainder into the sticky bit.
        """
        c = self._c
        m = self._fmt.mantissa_bits
        w = 2 * m + 10
        s = s[: m + 4]

        n = zero_extend(c, shift_left_const(c, zero_extend(c, scaled, w), m + 6), w)
        r, _ = subtract(c, n, array_multiply(c, s, s)[:w] if 2 * s.width >= w else zero_extend(c, array_multiply(c, s, s), w))

        # estimate too large: s - 1, r + 2s - 1
        too_big = r[-1]
        two_s = zero_extend(c, concat([c.zeros(1), s]), w)
        r_fix, _ = add(c, r, two_s)
        r_fix, _ = subtract(c, r_fix, c.const(1, w))
        s_fix, _ = subtract(c, s, c.const(1, s.width))
        s = mux_(c, too_big, s_fix, s)
        r = mux_(c, too_big, r_fix, r)

        # estimate too small: s + 1, r - (2s + 1)
        two_s1 = zero_extend(c, concat([c.const(1, 1), s]), w)
        r_up, ge = subtract(c, r, two_s1)
        s, _ = increment(c, s, ge)
        r = mux_(c, ge, r_up, r)

        sticky = not_(c, is_zero(c, r))
        return concat([or_(c, s[0], sticky), s[1:], c.zeros(1)])

    def rsqrt(self, a: BitWord) -> BitWord:
        """
        1 / sqrt(a) with a single rounding.

        The reciprocal of the square root estimate is truncated to Q ~ 2^(M+3) / sqrt(scaled) and,
        with division correction, fixed up against the integer condition Q^2 * S <= 2^(3M+6)
        (S = scaled * 2^M), so the result is correctly rounded.
        """
        c, fmt = self._c, self._fmt
        m = fmt.mantissa_bits
        f = m + _NR_EXTRA_BITS
        fa = self.fields(a)

        sig, e = self._normalized_sig(fa)
        u, _ = subtract(c, e, self._sconst(fmt.bias))
        par = u[0]
        e_out, _ = subtract(c, self._sconst(fmt.bias - 1), asr1(concat([c.zeros(1), u[1:]])))

        scaled = mux_(c, par, concat([c.zeros(1), sig]), concat([sig, c.zeros(1)]))

        k = min(_SQRT_LUT_BITS, m)
        y = self._lut(concat([sig[m - k : m], par]), _sqrt_lut(k, f), f + 1)
        for _ in range(_HERON_ITERATIONS):
            x = self._nr_reciprocal(y, f, f)
            z = array_multiply(c, scaled, x)[m : m + f + 2]
            total, carry = add(c, zero_extend(c, y, f + 2), z)
            y = concat([total, carry])[1 : f + 2]

        # truncation can leave sqrt(1) just below one
        y = mux_(c, y[f], y, c.const(1 << f, f + 1))

        # 2 / sqrt(scaled) in [1, 2] with m + 2 fractional bits
        x = self._nr_reciprocal(y, f, f)
        q = x[f - m - 3 :]
        if self._div_correction:
            t = self._correct_rsqrt(scaled, q)
        else:
            t = concat([reduce_or(c, x[: f - m - 3]), q])

        result = self.round_pack(c.zeros(1), e_out, t)
        nan = or_(c, fa.nan, and_(c, fa.sign, not_(c, fa.zero)))
        return self._special(result, fa.sign, nan, fa.zero, fa.inf)

    def _correct_rsqrt(self, scaled: BitWord, q: BitWord) -> BitWord:
        """
        Turn an estimate q of floor(2^(M+3) / sqrt(scaled)) into the exact floor and append the sticky bit.
        """
        c = self._c
        m = self._fmt.mantissa_bits
        w = 3 * m + 10
        s_w = zero_extend(c, scaled, w)

        qs = array_multiply(c, q, scaled)
        r, _ = subtract(c, c.const(1 << (3 * m + 6), w), zero_extend(c, array_multiply(c, q, qs), w))

        # estimate too large: q - 1, r + 2qS - S, qS - S
        too_big = r[-1]
        r_fix, _ = add(c, r, zero_extend(c, concat([c.zeros(1), qs]), w))
        r_fix, _ = subtract(c, r_fix, s_w)
        qs_fix, _ = subtract(c, qs, zero_extend(c, scaled, qs.width))
        q_fix, _ = subtract(c, q, c.const(1, q.width))
        q = mux_(c, too_big, q_fix, q)
        r = mux_(c, too_big, r_fix, r)
        qs = mux_(c, too_big, qs_fix, qs)

        # estimate too small: q + 1, r - (2qS + S)
        step, _ = add(c, zero_extend(c, concat([c.zeros(1), qs]), w), s_w)
        r_up, ge = subtract(c, r, step)
        q, _ = increment(c, q, ge)
        r = mux_(c, ge, r_up, r)

        return concat([not_(c, is_zero(c, r)), q])

    def mul3(self, a: BitWord, b: BitWord, s: BitWord) -> BitWord:
        """
        a * b * s rounded once: the exact product of the three significands is normalized and
        rounded in a single step.
        """
        c, fmt = self._c, self._fmt
        ew = self.exp_width
        fa, fb, fs = self.fields(a), self.fields(b), self.fields(s)

        p = array_multiply(c, array_multiply(c, fa.sig, fb.sig), fs.sig)
        pn, lz = normalize(c, p)

        e, _ = add(c, zero_extend(c, fa.exp_eff, ew), zero_extend(c, fb.exp_eff, ew))
        e, _ = add(c, e, zero_extend(c, fs.exp_eff, ew))
        e, _ = subtract(c, e, self._sconst(2 * fmt.bias - 2))
        e, _ = subtract(c, e, zero_extend(c, lz, ew))

        sign = xor_(c, xor_(c, fa.sign, fb.sign), fs.sign)
        result = self.round_pack(sign, e, self._collapse(pn))

        inf = or_(c, or_(c, fa.inf, fb.inf), fs.inf)
        zero = or_(c, or_(c, fa.zero, fb.zero), fs.zero)
        nan = or_(c, or_(c, or_(c, fa.nan, fb.nan), fs.nan), and_(c, inf, zero))
        return self._special(result, sign, nan, inf, zero)

    def compare(self, a: BitWord, b: BitWord) -> Tuple[BitWord, BitWord, BitWord]:
        """
        IEEE-754 comparison (+0 == -0).

        Returns
        -------
        Tuple[BitWord, BitWord, BitWord]
            the lt, eq and unordered bits. lt and eq are 0 when either operand is NaN.
        """
        c = self._c
        n = self._fmt.bit_width
        fa, fb = self.fields(a), self.fields(b)

        def key(x: BitWord) -> BitWord:
            mag = zero_extend(c, x[: n - 1], n + 1)
            return mux_(c, x[n - 1], negate(c, mag), mag)

        diff, _ = subtract(c, key(a), key(b))
        unordered = or_(c, fa.nan, fb.nan)
        ordered = not_(c, unordered)
        lt = and_(c, diff[-1], ordered)
        eq = and_(c, is_zero(c, diff), ordered)
        return lt, eq, unordered

    def max(self, a: BitWord, b: BitWord) -> BitWord:
        """
        b if a < b else a. NaN operands produce the canonical NaN.
        """
        lt, _, unordered = self.compare(a, b)
        out = mux_(self._c, lt, b, a)
        return mux_(self._c, unordered, self.const(self._fmt.canonical_nan), out)

    def to_int(self, x: BitWord, width: int) -> BitWord:
        """
        Convert to a signed integer (two's complement), rounding towards minus infinity.
        The result is undefined for NaN, infinities and out-of-range values.
        """
        c, fmt = self._c, self._fmt
        m, ew = fmt.mantissa_bits, self.exp_width
        f = self.fields(x)

        sh, _ = subtract(c, zero_extend(c, f.exp_eff, ew), self._sconst(fmt.bias + m))
        right_amount = negate(c, sh)
        k = max(width, m + 1)
        sig = zero_extend(c, f.sig, k)

        right, frac = barrel_shift(c, sig, right_amount, "right")
        left, _ = barrel_shift(c, sig, sh, "left")
        neg_shift = sh[-1]
        mag = mux_(c, neg_shift, right, left)[:width]
        frac = and_(c, frac, neg_shift)

        flipped, _ = increment(c, not_(c, mag), not_(c, frac))
        return mux_(c, f.sign, flipped, mag)

    def from_int(self, k: BitWord) -> BitWord:
        """
        Convert a signed integer (two's complement) to floating point with round-to-nearest-even.
        """
        c, fmt = self._c, self._fmt
        w, ew = k.width, self.exp_width
        sign = k[-1]
        mag = mux_(c, sign, negate(c, k), k)
        mn, lz = normalize(c, mag)
        e, _ = subtract(c, self._sconst(fmt.bias + w - 1), zero_extend(c, lz, ew))
        return self.round_pack(sign, e, self._collapse(mn))


@functools.cache
def _reciprocal_lut(index_bits: int, frac_bits: int) -> List[int]:
    """
    Seeds for 1/b: for each interval of b in [1, 2), the FP32 reciprocal of the interval midpoint.
    """
    entries = []
    for i in range(1 << index_bits):
        mid = 1.0 + (i + 0.5) / (1 << index_bits)
        seed = float(np.float32(1.0) / np.float32(mid))
        entries.append(int(np.floor(seed * (1 << frac_bits))))
    return entries


@functools.cache
def _sqrt_lut(index_bits: int, frac_bits: int) -> List[int]:
    """
    Seeds for sqrt(m), m in [1, 4): the index MSB selects [1, 2) or [2, 4), the remaining bits the interval.
    """
    entries = []
    for par in (0, 1):
        for i in range(1 << index_bits):
            mid = (1.0 + (i + 0.5) / (1 << index_bits)) * (2.0 if par else 1.0)
            seed = float(np.sqrt(np.float32(mid)))
            entries.append(int(np.floor(seed * (1 << frac_bits))))
    return entries


def tensor_to_word(c: GateNetlist, x: BitPlaneTensor) -> BitWord:
    # planes are MSB-first, words LSB-first
    return c.input_bits(x.planes[::-1])


def word_to_tensor(fmt: PrecisionFormat, x: BitWord, shape=None) -> BitPlaneTensor:
    return BitPlaneTensor(fmt, x.values[::-1].copy(), shape)


def _check_operands(*tensors: BitPlaneTensor) -> PrecisionFormat:
    fmt = tensors[0].format
    for t in tensors[1:]:
        if t.format != fmt:
            raise ValueError(f"format mismatch: {fmt.name} != {t.format.name}")
        if t.n_elements != tensors[0].n_elements:
            raise ValueError(f"element count mismatch: {tensors[0].n_elements} != {t.n_elements}")
    return fmt


def _run(op: str, *tensors: BitPlaneTensor, netlist: Optional[GateNetlist] = None, div_correction: bool = True):
    fmt = _check_operands(*tensors)
    c = GateNetlist(lanes=tensors[0].n_elements) if netlist is None else netlist
    unit = FpUnit(c, fmt, div_correction=div_correction)
    words = [tensor_to_word(c, t) for t in tensors]
    out = getattr(unit, op)(*words)
    return word_to_tensor(fmt, out.broadcast(tensors[0].n_elements), tensors[0].shape)


def fp_add(a: BitPlaneTensor, b: BitPlaneTensor, netlist: Optional[GateNetlist] = None) -> BitPlaneTensor:
    return _run("add", a, b, netlist=netlist)


def fp_sub(a: BitPlaneTensor, b: BitPlaneTensor, netlist: Optional[GateNetlist] = None) -> BitPlaneTensor:
    return _run("sub", a, b, netlist=netlist)


def fp_mul(a: BitPlaneTensor, b: BitPlaneTensor, netlist: Optional[GateNetlist] = None) -> BitPlaneTensor:
    return _run("mul", a, b, netlist=netlist)


def fp_div(
    a: BitPlaneTensor, b: BitPlaneTensor, netlist: Optional[GateNetlist] = None, div_correction: bool = True
) -> BitPlaneTensor:
    return _run("div", a, b, netlist=netlist, div_correction=div_correction)


def fp_reciprocal(
    b: BitPlaneTensor, netlist: Optional[GateNetlist] = None, div_correction: bool = True
) -> BitPlaneTensor:
    return _run("reciprocal", b, netlist=netlist, div_correction=div_correction)


def fp_sqrt(a: BitPlaneTensor, netlist: Optional[GateNetlist] = None, div_correction: bool = True) -> BitPlaneTensor:
    return _run("sqrt", a, netlist=netlist, div_correction=div_correction)


def fp_rsqrt(a: BitPlaneTensor, netlist: Optional[GateNetlist] = None, div_correction: bool = True) -> BitPlaneTensor:
    return _run("rsqrt", a, netlist=netlist, div_correction=div_correction)


def fp_mul3(
    a: BitPlaneTensor, b: BitPlaneTensor, s: BitPlaneTensor, netlist: Optional[GateNetlist] = None
) -> BitPlaneTensor:
    return _run("mul3", a, b, s, netlist=netlist)


def fp_max(a: BitPlaneTensor, b: BitPlaneTensor, netlist: Optional[GateNetlist] = None) -> BitPlaneTensor:
    return _run("max", a, b, netlist=netlist)


def fp_compare(a: BitPlaneTensor, b: BitPlaneTensor, netlist: Optional[GateNetlist] = None) -> Dict[str, np.ndarray]:
    """
    Lane-wise comparison.

    Returns
    -------
    Dict[str, np.ndarray]
        boolean arrays for the "lt", "eq" and "unordered" relations
    """
    fmt = _check_operands(a, b)
    c = GateNetlist(lanes=a.n_elements) if netlist is None else netlist
    unit = FpUnit(c, fmt)
    lt, eq, un = unit.compare(tensor_to_word(c, a), tensor_to_word(c, b))
    lanes = a.n_elements
    return {
        "lt": lt.broadcast(lanes).values[0].copy(),
        "eq": eq.broadcast(lanes).values[0].copy(),
        "unordered": un.broadcast(lanes).values[0].copy(),
    }


def fp_to_int(x: BitPlaneTensor, width: int, netlist: Optional[GateNetlist] = None) -> np.ndarray:
    """
    floor(x) as signed integers of the given width.
    """
    c = GateNetlist(lanes=x.n_elements) if netlist is None else netlist
    unit = FpUnit(c, x.format)
    k = unit.to_int(tensor_to_word(c, x), width).broadcast(x.n_elements)
    raw = np.array(k.to_int_list(), dtype=object)
    return np.array([v - (1 << width) if v >> (width - 1) else v for v in raw], dtype=np.int64)


def int_to_fp(values, width: int, fmt: PrecisionFormat, netlist: Optional[GateNetlist] = None) -> BitPlaneTensor:
    """
    Convert signed integers (which must fit in width bits) to floating point.
    """
    values = [int(v) for v in np.asarray(values).reshape(-1)]
    c = GateNetlist(lanes=len(values)) if netlist is None else netlist
    unit = FpUnit(c, fmt)
    k = c.input_word([v % (1 << width) for v in values], width)
    return word_to_tensor(fmt, unit.from_int(k).broadcast(len(values)))
