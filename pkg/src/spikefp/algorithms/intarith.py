# Copyright (C) 2025 spikefp contributors
#
# SPDX-License-Identifier: MIT

import enum
from typing import List, Optional, Sequence, Tuple

import numpy as np
import numpy.typing as npt

from spikefp.algorithms.gates import and_, full_adder, mux_, not_, or_, xor_
from spikefp.data_structures import BitWord, GateNetlist, concat, repeat_bit


class Ordering(enum.IntEnum):
    LT = -1
    EQ = 0
    GT = 1


def _check_same_width(a: BitWord, b: BitWord):
    if a.width != b.width:
        raise ValueError(f"operand width mismatch: {a.width} != {b.width}")


def _bit(c: GateNetlist, value: Optional[BitWord | int]) -> BitWord:
    if value is None:
        return c.zeros(1)
    if isinstance(value, BitWord):
        if value.width != 1:
            raise ValueError("carry-in must be a single bit")
        return value
    return c.const(int(value), 1)


def ones(c: GateNetlist, width: int) -> BitWord:
    return c.const((1 << width) - 1, width)


def zero_extend(c: GateNetlist, x: BitWord, width: int) -> BitWord:
    if width < x.width:
        raise ValueError("cannot zero-extend to a narrower width")
    if width == x.width:
        return x
    return concat([x, c.zeros(width - x.width)])


def sign_extend(x: BitWord, width: int) -> BitWord:
    if width < x.width:
        raise ValueError("cannot sign-extend to a narrower width")
    if width == x.width:
        return x
    return concat([x, repeat_bit(x[-1], width - x.width)])


def shift_left_const(c: GateNetlist, x: BitWord, amount: int) -> BitWord:
    """
    Logical left shift by a constant amount (wiring only, width preserved).
    """
    if amount == 0:
        return x
    if amount >= x.width:
        return c.zeros(x.width)
    return concat([c.zeros(amount), x[: x.width - amount]])


def shift_right_const(c: GateNetlist, x: BitWord, amount: int) -> BitWord:
    """
    Logical right shift by a constant amount (wiring only, width preserved).
    """
    if amount == 0:
        return x
    if amount >= x.width:
        return c.zeros(x.width)
    return concat([x[amount:], c.zeros(amount)])


def asr1(x: BitWord) -> BitWord:
    """
    Arithmetic right shift by one position (wiring only).
    """
    if x.width == 1:
        return x
    return concat([x[1:], x[-1]])


def word_not(c: GateNetlist, a: BitWord) -> BitWord:
    return not_(c, a)


def word_and(c: GateNetlist, a: BitWord, b: BitWord) -> BitWord:
    return and_(c, a, b)


def word_or(c: GateNetlist, a: BitWord, b: BitWord) -> BitWord:
    return or_(c, a, b)


def word_xor(c: GateNetlist, a: BitWord, b: BitWord) -> BitWord:
    return xor_(c, a, b)


def mux_word(c: GateNetlist, s: BitWord, a: BitWord, b: BitWord) -> BitWord:
    """
    Select a where s = 1 and b otherwise. s must be a single bit shared by the whole word.
    """
    _check_same_width(a, b)
    return mux_(c, s, a, b)


def _reduce(c: GateNetlist, x: BitWord, gate) -> BitWord:
    while x.width > 1:
        half = x.width // 2
        y = gate(c, x[:half], x[half : 2 * half])
        x = concat([y, x[2 * half :]]) if x.width % 2 else y
    return x


def reduce_or(c: GateNetlist, x: BitWord) -> BitWord:
    """
    OR of all the bits of a word, computed by a balanced tree of 2-input gates.
    """
    return _reduce(c, x, or_)


def reduce_and(c: GateNetlist, x: BitWord) -> BitWord:
    return _reduce(c, x, and_)


def is_zero(c: GateNetlist, x: BitWord) -> BitWord:
    return not_(c, reduce_or(c, x))


def ripple_add(c: GateNetlist, a: BitWord, b: BitWord, cin: Optional[BitWord | int] = None) -> Tuple[BitWord, BitWord]:
    """
    N-bit ripple-carry adder: a chain of N full adders (13N neurons).

    Returns
    -------
    Tuple[BitWord, BitWord]
        the sum (a + b + cin) mod 2^N and the carry-out bit
    """
    _check_same_width(a, b)
    carry = _bit(c, cin)
    bits = []
    for i in range(a.width):
        s, carry = full_adder(c, a[i], b[i], carry)
        bits.append(s)

    return concat(bits), carry


def pg_carry_chain(
    c: GateNetlist, a: BitWord, b: BitWord, cin: Optional[BitWord | int] = None
) -> Tuple[BitWord, BitWord]:
    """
    Propagate-generate adder.

    P = a XOR b and G = a AND b are computed for all bits in parallel.
    Each carry C[i+1] = G[i] OR (P[i] AND C[i]) is built from an AND and an OR gate, so the
    carry chain costs two neuron layers per bit. The sum is P XOR C.

    Returns
    -------
    Tuple[BitWord, BitWord]
        the sum (a + b + cin) mod 2^N and the carry-out bit
    """
    _check_same_width(a, b)
    p = xor_(c, a, b)
    g = and_(c, a, b)

    carries = [_bit(c, cin)]
    for i in range(a.width):
        carries.append(or_(c, g[i], and_(c, p[i], carries[-1])))

    s = xor_(c, p, concat(carries[:-1]))
    return s, carries[-1]


def add(c: GateNetlist, a: BitWord, b: BitWord, cin: Optional[BitWord | int] = None) -> Tuple[BitWord, BitWord]:
    return pg_carry_chain(c, a, b, cin)


def subtract(c: GateNetlist, a: BitWord, b: BitWord) -> Tuple[BitWord, BitWord]:
    """
    Two's-complement subtraction a + NOT(b) + 1.

    Returns
    -------
    Tuple[BitWord, BitWord]
        the difference mod 2^N and the carry-out, which is 1 iff a >= b (unsigned)
    """
    _check_same_width(a, b)
    return add(c, a, not_(c, b), 1)


def increment(c: GateNetlist, a: BitWord, cin: Optional[BitWord | int] = 1) -> Tuple[BitWord, BitWord]:
    """
    Half-adder chain computing a + cin.
    """
    carries = [_bit(c, cin)]
    for i in range(a.width):
        carries.append(and_(c, a[i], carries[-1]))

    return xor_(c, a, concat(carries[:-1])), carries[-1]


def negate(c: GateNetlist, a: BitWord) -> BitWord:
    return increment(c, not_(c, a), 1)[0]


def compare(c: GateNetlist, a: BitWord, b: BitWord) -> Tuple[BitWord, BitWord, BitWord]:
    """
    Unsigned comparison built from a subtractor.

    Returns
    -------
    Tuple[BitWord, BitWord, BitWord]
        the lt, eq and gt bits
    """
    diff, ge = subtract(c, a, b)
    eq = is_zero(c, diff)
    lt = not_(c, ge)
    gt = and_(c, ge, not_(c, eq))
    return lt, eq, gt


def barrel_shift(c: GateNetlist, x: BitWord, amount: BitWord, direction: str = "right") -> Tuple[BitWord, BitWord]:
    """
    Logical shift by a variable amount using one MUX stage per bit of the amount.

    Parameters
    ----------
    x
        the word to shift
    amount
        the shift amount (unsigned). Amounts >= x.width produce a zero word.
    direction
        "left" or "right"

    Returns
    -------
    Tuple[BitWord, BitWord]
        the shifted word and the sticky bit: the OR of every bit shifted out of the word
    """
    if direction not in {"left", "right"}:
        raise ValueError('direction must be either "left" or "right"')

    w = x.width
    sticky = c.zeros(1)
    for k in range(amount.width):
        s = 1 << k
        if direction == "right":
            lost = x[: min(s, w)]
            shifted = shift_right_const(c, x, s)
        else:
            lost = x[max(w - s, 0) :]
            shifted = shift_left_const(c, x, s)

        sticky = or_(c, sticky, and_(c, amount[k], reduce_or(c, lost)))
        x = mux_(c, amount[k], shifted, x)

    return x, sticky


def _lzc_stages(c: GateNetlist, x: BitWord, extra: Optional[BitWord]) -> Tuple[BitWord, Optional[BitWord]]:
    w = x.width
    levels = w.bit_length()
    size = 1 << levels
    # padding the low end with ones bounds the count to w
    xp = concat([ones(c, size - w), x])
    yp = concat([c.zeros(size - w), extra]) if extra is not None else None

    count = [None] * levels
    for k in range(levels - 1, -1, -1):
        half = 1 << k
        z = is_zero(c, xp[size - half :])
        count[k] = z
        if yp is None:
            xp = mux_(c, z, shift_left_const(c, xp, half), xp)
        else:
            both = mux_(
                c,
                z,
                concat([shift_left_const(c, xp, half), shift_left_const(c, yp, half)]),
                concat([xp, yp]),
            )
            xp, yp = both[:size], both[size:]

    shifted = yp[size - w :] if yp is not None else None
    return concat(count), shifted


def leading_zero_count(c: GateNetlist, x: BitWord) -> BitWord:
    """
    Count the zero bits above the most significant set bit (x = 0 yields x.width).

    The count is computed by a binary search over log2(width) stages and has
    width.bit_length() bits.
    """
    return _lzc_stages(c, x, None)[0]


def normalize(c: GateNetlist, x: BitWord) -> Tuple[BitWord, BitWord]:
    """
    Shift x left until its most significant bit is set.

    Returns
    -------
    Tuple[BitWord, BitWord]
        the normalized word and the leading zero count
    """
    count, shifted = _lzc_stages(c, x, x)
    return shifted, count


def _pad_to_span(c: GateNetlist, row: Tuple[BitWord, int], lo: int, hi: int) -> BitWord:
    word, off = row
    parts = []
    if off > lo:
        parts.append(c.zeros(off - lo))
    parts.append(word)
    if hi > off + word.width:
        parts.append(c.zeros(hi - off - word.width))
    return concat(parts)


def _csa_level(c: GateNetlist, rows: List[Tuple[BitWord, int]], n: int) -> List[Tuple[BitWord, int]]:
    """
    Reduce every group of three rows to two rows with one layer of word-level full adders.
    """
    groups = len(rows) // 3
    spans = []
    a_parts, b_parts, c_parts = [], [], []
    for g in range(groups):
        triple = rows[3 * g : 3 * g + 3]
        lo = min(off for _, off in triple)
        hi = max(off + w.width for w, off in triple)
        spans.append((lo, hi))
        a_parts.append(_pad_to_span(c, triple[0], lo, hi))
        b_parts.append(_pad_to_span(c, triple[1], lo, hi))
        c_parts.append(_pad_to_span(c, triple[2], lo, hi))

    s, carry = full_adder(c, concat(a_parts), concat(b_parts), concat(c_parts))

    out = []
    pos = 0
    for lo, hi in spans:
        width = hi - lo
        out.append((s[pos : pos + width], lo))
        # carries beyond bit n - 1 vanish modulo 2^n
        keep = min(width, n - lo - 1)
        if keep > 0:
            out.append((carry[pos : pos + keep], lo + 1))
        pos += width

    return out + rows[3 * groups :]


def array_multiply(c: GateNetlist, a: BitWord, b: BitWord) -> BitWord:
    """
    Unsigned array multiplier.

    Partial products a[i] AND b[j] are computed in a single gate layer, reduced by carry-save
    (3:2) layers until two rows remain, and summed by a propagate-generate adder.

    Returns
    -------
    BitWord
        the product, with width a.width + b.width
    """
    wa, wb = a.width, b.width
    n = wa + wb

    pp = and_(
        c,
        concat([a] * wb),
        concat([repeat_bit(b[j], wa) for j in range(wb)]),
    )
    rows = [(pp[j * wa : (j + 1) * wa], j) for j in range(wb)]

    while len(rows) > 2:
        rows = _csa_level(c, rows, n)

    x = _pad_to_span(c, rows[0], 0, n)
    if len(rows) == 1:
        return x
    y = _pad_to_span(c, rows[1], 0, n)
    return add(c, x, y)[0]


def ripple_array_multiply(c: GateNetlist, a: BitWord, b: BitWord) -> BitWord:
    """
    Unsigned shift-and-add multiplier: each partial-product row is accumulated by a ripple-carry adder.

    Row j is added to the running sum shifted by j, so the multiplier costs
    a.width * b.width AND neurons and (b.width - 1) ripple adders of a.width bits.

    Returns
    -------
    BitWord
        the product, with width a.width + b.width
    """
    wa, wb = a.width, b.width

    pp = and_(
        c,
        concat([a] * wb),
        concat([repeat_bit(b[j], wa) for j in range(wb)]),
    )
    if wb == 1:
        return concat([pp, c.zeros(1)])

    low = []
    acc = pp[:wa]
    for j in range(1, wb):
        low.append(acc[0])
        if acc.width > wa:
            upper = acc[1:]
        elif wa > 1:
            upper = concat([acc[1:], c.zeros(1)])
        else:
            upper = c.zeros(1)
        s, cout = ripple_add(c, upper, pp[j * wa : (j + 1) * wa])
        acc = concat([s, cout])

    return concat(low + [acc])


def to_ints(word: BitWord) -> List[int]:
    return word.to_int_list()


def compare_values(a: Sequence[int], b: Sequence[int], width: int, netlist: Optional[GateNetlist] = None) -> List[Ordering]:
    """
    Compare unsigned integers lane-wise using the gate-level comparator.
    """
    if len(a) != len(b):
        raise ValueError("operands must have the same number of lanes")
    c = GateNetlist(lanes=len(a)) if netlist is None else netlist
    lt, eq, _ = compare(c, c.input_word(a, width), c.input_word(b, width))
    return [
        Ordering.LT if less else (Ordering.EQ if equal else Ordering.GT)
        for less, equal in zip(lt.values[0], eq.values[0])
    ]


def leading_zeros_reference(values: npt.ArrayLike, width: int) -> npt.NDArray[np.int64]:
    """
    Host reference for leading_zero_count.
    """
    v = np.asarray(values).astype(np.uint64)
    out = np.full(v.shape, width, dtype=np.int64)
    for i in range(width):
        out = np.where((v >> np.uint64(i)) & np.uint64(1), width - 1 - i, out)
    return out
