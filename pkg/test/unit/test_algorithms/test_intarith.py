# Copyright (C) 2025 spikefp contributors
#
# SPDX-License-Identifier: MIT

import itertools

import numpy as np
import pytest

from spikefp.algorithms.intarith import (
    Ordering,
    add,
    array_multiply,
    asr1,
    barrel_shift,
    compare,
    compare_values,
    increment,
    is_zero,
    leading_zero_count,
    leading_zeros_reference,
    negate,
    normalize,
    reduce_and,
    reduce_or,
    ripple_array_multiply,
    ripple_add,
    sign_extend,
    subtract,
    to_ints,
    zero_extend,
)
from spikefp.data_structures import GateNetlist


def _grid(width_a: int, width_b: int):
    pairs = np.array(list(itertools.product(range(1 << width_a), range(1 << width_b))), dtype=np.uint64)
    return pairs[:, 0], pairs[:, 1]


def _random(width: int, n: int, seed: int):
    return np.random.default_rng(seed).integers(0, 1 << width, size=n, dtype=np.uint64)


@pytest.mark.unit
class TestAdders:
    def test_ripple_add_exhaustive(self):
        a, b = _grid(4, 4)
        c = GateNetlist(lanes=len(a))
        s, cout = ripple_add(c, c.input_word(a, 4), c.input_word(b, 4), 1)

        total = a + b + 1
        assert (s.to_uint() == total % 16).all()
        assert (cout.to_uint() == total // 16).all()
        assert c.neuron_count == 13 * 4

    def test_pg_add(self):
        a, b = _random(16, 512, 0), _random(16, 512, 1)
        c = GateNetlist(lanes=512)
        s, cout = add(c, c.input_word(a, 16), c.input_word(b, 16))

        assert (s.to_uint() == (a + b) % (1 << 16)).all()
        assert (cout.to_uint() == (a + b) >> 16).all()

    def test_pg_carry_is_two_layers_per_bit(self):
        c = GateNetlist()
        add(c, c.input_word([0], 16), c.input_word([0], 16))
        # P, the AND/OR pairs feeding bit 15 and the final XOR
        assert c.depth == 3 + 2 * 15 + 3
        assert c.neuron_count == 13 * 16

    def test_pg_carry_uses_standard_gates(self):
        c = GateNetlist(record=True)
        add(c, c.input_word([0], 4), c.input_word([0], 4))
        thresholds = {theta for _, theta, _, _ in c.neurons()}
        assert thresholds == {0.5, 1.0, 1.5}
        assert all(len(wiring) <= 2 for *_, wiring in c.neurons())

    def test_subtract(self):
        a, b = _grid(4, 4)
        c = GateNetlist(lanes=len(a))
        d, ge = subtract(c, c.input_word(a, 4), c.input_word(b, 4))

        assert (d.to_uint() == (a - b) % 16).all()
        assert (ge.to_uint().astype(bool) == (a >= b)).all()

    def test_increment_and_negate(self):
        a = np.arange(256, dtype=np.uint64)
        c = GateNetlist(lanes=256)
        x = c.input_word(a, 8)

        s, cout = increment(c, x)
        assert (s.to_uint() == (a + 1) % 256).all()
        assert (cout.to_uint() == (a == 255)).all()
        assert (negate(c, x).to_uint() == (256 - a) % 256).all()

    def test_width_mismatch(self):
        c = GateNetlist()
        with pytest.raises(ValueError, match="operand width mismatch"):
            ripple_add(c, c.const(0, 4), c.const(0, 5))


@pytest.mark.unit
class TestCompare:
    def test_exhaustive(self):
        a, b = _grid(4, 4)
        c = GateNetlist(lanes=len(a))
        lt, eq, gt = compare(c, c.input_word(a, 4), c.input_word(b, 4))

        assert (lt.values[0] == (a < b)).all()
        assert (eq.values[0] == (a == b)).all()
        assert (gt.values[0] == (a > b)).all()

    def test_compare_values(self):
        assert compare_values([1, 5, 7], [2, 5, 3], 3) == [Ordering.LT, Ordering.EQ, Ordering.GT]
        with pytest.raises(ValueError, match="same number of lanes"):
            compare_values([1, 2], [1], 3)


@pytest.mark.unit
class TestWordHelpers:
    def test_extend(self):
        c = GateNetlist(lanes=2)
        x = c.input_word([0b101, 0b011], 3)
        assert zero_extend(c, x, 5).to_uint().tolist() == [0b00101, 0b00011]
        assert sign_extend(x, 5).to_uint().tolist() == [0b11101, 0b00011]
        assert asr1(x).to_uint().tolist() == [0b110, 0b001]
        with pytest.raises(ValueError, match="narrower"):
            zero_extend(c, x, 2)

    def test_reductions(self):
        values = [0, 1, 0b1000000, 0b1111111]
        c = GateNetlist(lanes=4)
        x = c.input_word(values, 7)
        assert reduce_or(c, x).values[0].tolist() == [False, True, True, True]
        assert reduce_and(c, x).values[0].tolist() == [False, False, False, True]
        assert is_zero(c, x).values[0].tolist() == [True, False, False, False]


@pytest.mark.unit
class TestBarrelShift:
    def test_right(self):
        x, amount = _grid(8, 3)
        c = GateNetlist(lanes=len(x))
        y, sticky = barrel_shift(c, c.input_word(x, 8), c.input_word(amount, 3), "right")

        assert (y.to_uint() == x >> amount).all()
        lost = x & ((np.uint64(1) << amount) - np.uint64(1))
        assert (sticky.to_uint().astype(bool) == (lost != 0)).all()

    def test_left(self):
        x, amount = _grid(8, 3)
        c = GateNetlist(lanes=len(x))
        y, sticky = barrel_shift(c, c.input_word(x, 8), c.input_word(amount, 3), "left")

        assert (y.to_uint() == (x << amount) % 256).all()
        assert (sticky.to_uint().astype(bool) == ((x << amount) >= 256)).all()

    def test_large_amounts(self):
        x = np.full(16, 0xA5, dtype=np.uint64)
        amount = np.arange(16, dtype=np.uint64)
        c = GateNetlist(lanes=16)
        y, sticky = barrel_shift(c, c.input_word(x, 8), c.input_word(amount, 4))

        expected = np.where(amount < 8, x >> np.minimum(amount, 7), 0)
        assert (y.to_uint() == expected).all()
        assert sticky.to_uint().tolist() == [0] + [1] * 15

    def test_invalid_direction(self):
        c = GateNetlist()
        with pytest.raises(ValueError, match="direction"):
            barrel_shift(c, c.const(1, 4), c.const(1, 2), "up")


@pytest.mark.unit
class TestLeadingZeros:
    def test_exhaustive(self):
        for width in (5, 8, 11):
            x = np.arange(1 << width, dtype=np.uint64)
            c = GateNetlist(lanes=len(x))
            count = leading_zero_count(c, c.input_word(x, width))
            assert (count.to_uint() == leading_zeros_reference(x, width)).all(), width

    def test_normalize(self):
        x = np.arange(1 << 8, dtype=np.uint64)
        c = GateNetlist(lanes=len(x))
        y, count = normalize(c, c.input_word(x, 8))

        lz = leading_zeros_reference(x, 8).astype(np.uint64)
        assert (count.to_uint() == lz).all()
        assert (y.to_uint() == (x << lz) % 256).all()


@pytest.mark.unit
class TestArrayMultiply:
    def test_exhaustive_4x4(self):
        a, b = _grid(4, 4)
        c = GateNetlist(lanes=len(a))
        p = array_multiply(c, c.input_word(a, 4), c.input_word(b, 4))
        assert p.width == 8
        assert (p.to_uint() == a * b).all()

    def test_24x24(self):
        a, b = _random(24, 256, 2), _random(24, 256, 3)
        c = GateNetlist(lanes=256)
        p = array_multiply(c, c.input_word(a, 24), c.input_word(b, 24))
        assert p.width == 48
        assert to_ints(p) == [int(x) * int(y) for x, y in zip(a, b)]

    def test_uneven_widths(self):
        a, b = _grid(5, 3)
        c = GateNetlist(lanes=len(a))
        p = array_multiply(c, c.input_word(a, 5), c.input_word(b, 3))
        assert (p.to_uint() == a * b).all()

    def test_ripple_exhaustive_4x4(self):
        a, b = _grid(4, 4)
        c = GateNetlist(lanes=len(a))
        p = ripple_array_multiply(c, c.input_word(a, 4), c.input_word(b, 4))
        assert p.width == 8
        assert (p.to_uint() == a * b).all()
        # 16 partial products and three 4-bit ripple adders
        assert c.neuron_count == 16 + 3 * 4 * 13

    def test_ripple_uneven_widths(self):
        for wa, wb in ((5, 3), (3, 5), (1, 4), (4, 1)):
            a, b = _grid(wa, wb)
            c = GateNetlist(lanes=len(a))
            p = ripple_array_multiply(c, c.input_word(a, wa), c.input_word(b, wb))
            assert p.width == wa + wb
            assert (p.to_uint() == a * b).all()
