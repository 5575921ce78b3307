# Copyright (C) 2025 spikefp contributors
#
# SPDX-License-Identifier: MIT

import enum
from typing import Optional, Sequence, Tuple

import numpy as np
import numpy.typing as npt

from spikefp.data_structures import BitWord, GateNetlist, NeuronConfig

# Threshold selection for single-neuron gates
AND_THRESHOLD = 1.5
OR_THRESHOLD = 0.5
NOT_THRESHOLD = 1.0
NOT_BIAS = 1.5


class GateKind(enum.Enum):
    AND = "and"
    OR = "or"
    NOT = "not"
    XOR = "xor"
    MUX = "mux"

    @property
    def arity(self) -> int:
        return {"and": 2, "or": 2, "not": 1, "xor": 2, "mux": 3}[self.value]

    @property
    def neurons(self) -> int:
        """
        Number of neurons required to build a single-bit instance of the gate
        """
        return {"and": 1, "or": 1, "not": 1, "xor": 5, "mux": 5}[self.value]

    @staticmethod
    def from_name(name: str) -> "GateKind":
        try:
            return GateKind(name.strip().lower())
        except ValueError:
            raise ValueError(f'unknown gate "{name}"') from None


def not_(c: GateNetlist, a: BitWord) -> BitWord:
    return c.neuron_layer([(a, -1.0)], bias=NOT_BIAS, threshold=NOT_THRESHOLD)


def and_(c: GateNetlist, a: BitWord, b: BitWord) -> BitWord:
    return c.neuron_layer([(a, 1.0), (b, 1.0)], bias=0.0, threshold=AND_THRESHOLD)


def or_(c: GateNetlist, a: BitWord, b: BitWord) -> BitWord:
    return c.neuron_layer([(a, 1.0), (b, 1.0)], bias=0.0, threshold=OR_THRESHOLD)


def xor_(c: GateNetlist, a: BitWord, b: BitWord) -> BitWord:
    """
    XOR(a, b) = OR(AND(a, NOT b), AND(NOT a, b)): 5 neurons per bit.
    """
    na = not_(c, a)
    nb = not_(c, b)
    return or_(c, and_(c, a, nb), and_(c, na, b))


def mux_(c: GateNetlist, s: BitWord, a: BitWord, b: BitWord) -> BitWord:
    """
    MUX(s, a, b) = (s AND a) OR (NOT s AND b).

    The selector is buffered through two NOT neurons that are shared by every bit of the word,
    so a single-bit multiplexer uses 5 neurons.
    """
    ns = not_(c, s)
    ss = not_(c, ns)
    return or_(c, and_(c, ss, a), and_(c, ns, b))


def full_adder(c: GateNetlist, a: BitWord, b: BitWord, cin: BitWord) -> Tuple[BitWord, BitWord]:
    """
    Bitwise full adder built from 2 XOR (sharing a XOR b), 2 AND and 1 OR: 13 neurons per bit.

    Returns
    -------
    Tuple[BitWord, BitWord]
        the sum and carry-out words
    """
    x1 = xor_(c, a, b)
    s = xor_(c, x1, cin)
    cout = or_(c, and_(c, a, b), and_(c, x1, cin))
    return s, cout


_GATE_FUNCS = {
    GateKind.AND: and_,
    GateKind.OR: or_,
    GateKind.NOT: not_,
    GateKind.XOR: xor_,
    GateKind.MUX: mux_,
}


def _check_bits(inputs: Sequence) -> Sequence[npt.NDArray[np.bool_]]:
    out = []
    for x in inputs:
        x = np.atleast_1d(np.asarray(x))
        if not np.isin(x, (0, 1)).all():
            raise ValueError("gate inputs must be either 0 or 1")
        out.append(x.astype(bool))
    return out


def eval_gate_vec(
    kind: GateKind,
    inputs: Sequence[npt.ArrayLike],
    netlist: Optional[GateNetlist] = None,
) -> npt.NDArray[np.bool_]:
    """
    Evaluate a gate lane-wise over bit-plane operands.

    Parameters
    ----------
    kind
        the gate to evaluate
    inputs
        one bit vector per gate input (NOT: 1, AND/OR/XOR: 2, MUX: 3 as (s, a, b)).
        All vectors must have the same number of lanes.
    netlist
        the netlist accumulating spike counts. When not provided, a throw-away netlist is used.

    Returns
    -------
    npt.NDArray[np.bool_]
        the output bit of each lane
    """
    if len(inputs) != kind.arity:
        raise ValueError(f"{kind.name} expects {kind.arity} input(s), found {len(inputs)}")

    inputs = _check_bits(inputs)
    lanes = {len(x) for x in inputs}
    if len(lanes) != 1:
        raise ValueError(f"all operands must have the same number of lanes, found {sorted(lanes)}")

    if netlist is None:
        netlist = GateNetlist(lanes=lanes.pop())

    words = [netlist.input_bits(x) for x in inputs]
    return _GATE_FUNCS[kind](netlist, *words).values[0]


def eval_gate(kind: GateKind, inputs: Sequence[int], netlist: Optional[GateNetlist] = None) -> int:
    """
    Evaluate a gate on a single combination of input bits.
    """
    if len(inputs) != kind.arity:
        raise ValueError(f"{kind.name} expects {kind.arity} input(s), found {len(inputs)}")
    return int(eval_gate_vec(kind, [[x] for x in inputs], netlist)[0])


def spike_count(netlist: GateNetlist) -> int:
    """
    Return the number of spikes fired since the counter was last cleared.
    """
    return netlist.spike_count


def clear_spikes(netlist: GateNetlist):
    netlist.clear_spikes()


def build_gate(kind: GateKind, config: Optional[NeuronConfig] = None, record: bool = True) -> GateNetlist:
    """
    Construct a recorded single-lane instance of a gate, e.g. for dumping its netlist.
    """
    netlist = GateNetlist(lanes=1, config=config, record=record)
    words = [netlist.input_bits([False]) for _ in range(kind.arity)]
    _GATE_FUNCS[kind](netlist, *words)
    netlist.clear_spikes()
    return netlist


def dump_netlist(netlist: GateNetlist) -> str:
    return netlist.dump()
