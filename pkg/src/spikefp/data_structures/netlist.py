# Copyright (C) 2025 spikefp contributors
#
# SPDX-License-Identifier: MIT

import io
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
import numpy.typing as npt

from spikefp.data_structures.neuron import NeuronConfig, integrate_and_fire

# Wire ids below zero do not refer to neurons
CONST0_ID = -1
CONST1_ID = -2
_FIRST_INPUT_ID = -3

DEVIATION_MODES = ("uniform", "worst+", "worst-", "gaussian")


class BitWord(object):
    """
    A bundle of parallel spike channels, LSB-first, evaluated over one or more lanes.

    values has shape (width, lanes). Words with a single lane are broadcast when
    combined with words spanning more lanes.
    """

    __slots__ = ("_values", "_ids", "_depth")

    def __init__(self, values: npt.NDArray[np.bool_], ids: npt.NDArray[np.int64], depth: npt.NDArray[np.int64]):
        if values.ndim != 2:
            raise ValueError("values should be a 2D array")
        if len(ids) != values.shape[0] or len(depth) != values.shape[0]:
            raise ValueError("ids and depth must have one entry per bit")
        if values.shape[0] == 0:
            raise ValueError("width must be at least 1")
        self._values = values
        self._ids = ids
        self._depth = depth

    def __repr__(self) -> str:
        return f"BitWord(width={self.width}, lanes={self.lanes})"

    def __len__(self) -> int:
        return self.width

    def __getitem__(self, key) -> "BitWord":
        if isinstance(key, (int, np.integer)):
            key = slice(int(key), int(key) + 1 if key != -1 else None)
        if not isinstance(key, slice):
            raise TypeError("BitWord only supports integer and slice indexing")
        return BitWord(self._values[key], self._ids[key], self._depth[key])

    @property
    def values(self) -> npt.NDArray[np.bool_]:
        return self._values

    @property
    def ids(self) -> npt.NDArray[np.int64]:
        return self._ids

    @property
    def depth(self) -> npt.NDArray[np.int64]:
        return self._depth

    @property
    def width(self) -> int:
        return self._values.shape[0]

    @property
    def lanes(self) -> int:
        return self._values.shape[1]

    def to_uint(self) -> npt.NDArray[np.uint64]:
        """
        Decode the word as an unsigned integer per lane. Only valid for widths up to 64 bits.
        """
        if self.width > 64:
            raise ValueError("cannot decode words wider than 64 bits")
        acc = np.zeros(self.lanes, dtype=np.uint64)
        for i in range(self.width):
            acc |= self._values[i].astype(np.uint64) << np.uint64(i)
        return acc

    def to_int_list(self) -> List[int]:
        """
        Decode the word as arbitrary-precision integers, one per lane.
        """
        out = [0] * self.lanes
        for i in range(self.width - 1, -1, -1):
            bits = self._values[i]
            out = [(v << 1) | int(b) for v, b in zip(out, bits)]
        return out

    def take(self, index: npt.ArrayLike) -> "BitWord":
        """
        Gather lanes. This is pure wiring: no neurons are involved.
        """
        index = np.asarray(index, dtype=np.int64)
        if self.lanes == 1:
            return BitWord(np.repeat(self._values, len(index), axis=1), self._ids, self._depth)
        return BitWord(self._values[:, index], self._ids, self._depth)

    def broadcast(self, lanes: int) -> "BitWord":
        if self.lanes == lanes:
            return self
        if self.lanes != 1:
            raise ValueError(f"cannot broadcast a word with {self.lanes} lanes to {lanes} lanes")
        return BitWord(np.repeat(self._values, lanes, axis=1), self._ids, self._depth)


def concat(words: Sequence[BitWord]) -> BitWord:
    """
    Concatenate words, the first word providing the least significant bits.
    """
    if len(words) == 0:
        raise ValueError("cannot concatenate an empty sequence of words")
    lanes = max(w.lanes for w in words)
    words = [w.broadcast(lanes) for w in words]
    return BitWord(
        np.concatenate([w.values for w in words], axis=0),
        np.concatenate([w.ids for w in words]),
        np.concatenate([w.depth for w in words]),
    )


def repeat_bit(bit: BitWord, width: int) -> BitWord:
    """
    Fan a single-bit word out to width bits.
    """
    if bit.width != 1:
        raise ValueError("repeat_bit requires a single-bit word")
    return BitWord(
        np.repeat(bit.values, width, axis=0),
        np.repeat(bit.ids, width),
        np.repeat(bit.depth, width),
    )


class GateNetlist(object):
    """
    A feed-forward circuit of integrate-and-fire neurons.

    Neurons are created and evaluated in a single pass: every call to `neuron_layer` adds one
    layer of neurons whose inputs are the outputs of previously created neurons, constants, or
    circuit inputs, so the evaluation order is topological by construction.
    Neuron state is reset between logical operations: every neuron starts from a zero membrane.

    The netlist keeps track of the number of neurons, the number of fired spikes, and the depth
    (number of neuron layers along the longest path) of the circuit.
    """

    def __init__(
        self,
        lanes: int = 1,
        config: Optional[NeuronConfig] = None,
        seed: int = 0,
        deviation_mode: str = "uniform",
        record: bool = False,
    ):
        """
        Parameters
        ----------
        lanes
            the default number of lanes for inputs and constants
        config
            the neuron physics shared by every neuron in the circuit.
            The threshold of the config is ignored, as each gate selects its own threshold.
            The threshold deviation is interpreted as the maximum fractional deviation, or as the
            standard deviation of the per-instance factors in "gaussian" mode.
        seed
            seed used to draw noise and threshold deviations
        deviation_mode
            how deviations are assigned to neurons.
            "uniform", "worst+" and "worst-" perturb the threshold of each neuron, shared by all lanes.
            "gaussian" treats every lane as a separately fabricated circuit: the threshold, the bias and
            every synaptic weight of each neuron instance are scaled by an independent 1 + delta * N(0, 1) factor.
        record
            when True, record the weights, bias and wiring of every neuron so that the
            netlist can be dumped
        """
        if lanes < 1:
            raise ValueError("lanes must be a positive integer")
        if deviation_mode not in DEVIATION_MODES:
            raise ValueError('deviation_mode must be one of "uniform", "worst+", "worst-", "gaussian"')

        self._lanes = int(lanes)
        self._config = NeuronConfig(1.0) if config is None else config
        self._rng = np.random.default_rng(seed)
        self._deviation_mode = deviation_mode
        self._record = record

        self._neuron_count = 0
        self._neuron_instances = 0
        self._spike_count = 0
        self._max_depth = 0
        self._num_inputs = 0
        self._neurons = [] if record else None
        self._per_neuron_spikes = [] if record else None

    def __repr__(self) -> str:
        return f"GateNetlist(neurons={self._neuron_count}, spikes={self._spike_count}, depth={self._max_depth})"

    @property
    def lanes(self) -> int:
        return self._lanes

    @property
    def config(self) -> NeuronConfig:
        return self._config

    @property
    def neuron_count(self) -> int:
        """
        Number of neurons in the circuit (independent of the number of lanes)
        """
        return self._neuron_count

    @property
    def neuron_instances(self) -> int:
        """
        Number of neuron evaluations: the neuron count of every layer times the number of lanes it spans
        """
        return self._neuron_instances

    @property
    def spike_count(self) -> int:
        return self._spike_count

    @property
    def depth(self) -> int:
        """
        Number of neuron layers along the longest path of the circuit
        """
        return self._max_depth

    @property
    def recording(self) -> bool:
        return self._record

    def clear_spikes(self):
        self._spike_count = 0
        if self._per_neuron_spikes is not None:
            self._per_neuron_spikes = [0] * len(self._per_neuron_spikes)

    def recount_spikes(self) -> int:
        """
        Sum the per-neuron spike counters. Only available when recording.
        """
        if self._per_neuron_spikes is None:
            raise RuntimeError("spike recount requires a netlist constructed with record=True")
        return int(sum(self._per_neuron_spikes))

    def const(self, value: int, width: int) -> BitWord:
        """
        A constant word, shared by all lanes.
        """
        if value < 0 or value >= 1 << width:
            raise ValueError(f"constant {value} does not fit in {width} bits")
        bits = np.array([(value >> i) & 1 for i in range(width)], dtype=bool)
        return BitWord(
            bits[:, np.newaxis],
            np.where(bits, CONST1_ID, CONST0_ID).astype(np.int64),
            np.zeros(width, dtype=np.int64),
        )

    def zeros(self, width: int) -> BitWord:
        return self.const(0, width)

    def const_words(self, values: Sequence[int], width: int) -> BitWord:
        """
        A word holding a different constant in each lane.
        """
        if len(values) == 0:
            raise ValueError("values cannot be empty")
        bits = np.zeros((width, len(values)), dtype=bool)
        for j, v in enumerate(values):
            v = int(v)
            if v < 0 or v >= 1 << width:
                raise ValueError(f"constant {v} does not fit in {width} bits")
            for i in range(width):
                bits[i, j] = (v >> i) & 1
        ids = np.full(width, CONST0_ID, dtype=np.int64)
        return BitWord(bits, ids, np.zeros(width, dtype=np.int64))

    def input_word(self, values: npt.ArrayLike, width: int) -> BitWord:
        """
        Register a new circuit input from unsigned integers (one per lane).
        """
        values = np.asarray(values).reshape(-1).astype(np.uint64)
        shifts = np.arange(width, dtype=np.uint64)
        bits = ((values[np.newaxis, :] >> shifts[:, np.newaxis]) & np.uint64(1)).astype(bool)
        return self.input_bits(bits)

    def input_bits(self, bits: npt.ArrayLike) -> BitWord:
        """
        Register a new circuit input from a boolean array with shape (width, lanes).
        """
        bits = np.asarray(bits, dtype=bool)
        if bits.ndim == 1:
            bits = bits[np.newaxis, :]
        width = bits.shape[0]
        ids = _FIRST_INPUT_ID - (self._num_inputs + np.arange(width, dtype=np.int64))
        self._num_inputs += width
        return BitWord(bits, ids, np.zeros(width, dtype=np.int64))

    def _draw_deviation(self, width: int) -> npt.NDArray[np.float64]:
        delta = self._config.threshold_deviation
        if delta == 0:
            return np.zeros(width)
        if self._deviation_mode == "worst+":
            return np.full(width, abs(delta))
        if self._deviation_mode == "worst-":
            return np.full(width, -abs(delta))
        return self._rng.uniform(-abs(delta), abs(delta), size=width)

    def _draw_factors(self, width: int, lanes: int) -> npt.NDArray[np.float64]:
        delta = abs(self._config.threshold_deviation)
        return 1.0 + delta * self._rng.standard_normal(size=(width, lanes))

    def neuron_layer(self, inputs: Sequence[Tuple[BitWord, float]], bias: float, threshold: float) -> BitWord:
        """
        Create and evaluate one layer of neurons, one neuron per output bit.

        Neuron i receives bias + sum_k(w_k * inputs_k[i]) as input current.
        Single-bit inputs are fanned out to every neuron of the layer.

        Parameters
        ----------
        inputs
            the input words and their synaptic weights
        bias
            the constant bias current
        threshold
            the nominal firing threshold

        Returns
        -------
        BitWord
            the spikes emitted by the layer
        """
        if len(inputs) == 0:
            raise ValueError("a neuron requires at least one input")

        width = max(w.width for w, _ in inputs)
        lanes = max(w.lanes for w, _ in inputs)
        for w, _ in inputs:
            if w.width not in {1, width}:
                raise ValueError(f"input width mismatch: expected 1 or {width} bits, found {w.width}")
            if w.lanes not in {1, lanes}:
                raise ValueError(f"input lane mismatch: expected 1 or {lanes} lanes, found {w.lanes}")

        cfg = self._config
        process = self._deviation_mode == "gaussian" and cfg.threshold_deviation != 0

        current = np.full((width, lanes), float(bias))
        if process:
            current = current * self._draw_factors(width, lanes)
        depth = np.zeros(width, dtype=np.int64)
        for w, weight in inputs:
            synapse = float(weight) * self._draw_factors(width, lanes) if process else float(weight)
            current += synapse * w.values
            depth = np.maximum(depth, w.depth)
        depth = depth + 1

        if process:
            thresholds = threshold * self._draw_factors(width, lanes)
        else:
            thresholds = threshold * (1.0 + self._draw_deviation(width))[:, np.newaxis]
        noise = None
        if cfg.noise_sigma > 0:
            noise = self._rng.normal(0.0, cfg.noise_sigma, size=(width, lanes))

        membrane = np.zeros((width, lanes))
        spikes, _ = integrate_and_fire(
            current, thresholds, decay=cfg.decay, membrane=membrane, noise=noise, soft_reset=cfg.soft_reset
        )

        ids = np.arange(self._neuron_count, self._neuron_count + width, dtype=np.int64)
        if self._record:
            self._record_layer(ids, inputs, bias, thresholds, spikes)

        self._neuron_count += width
        self._neuron_instances += width * lanes
        self._spike_count += int(np.count_nonzero(spikes))
        self._max_depth = max(self._max_depth, int(depth.max()))

        return BitWord(spikes, ids, depth)

    def _record_layer(self, ids, inputs, bias, thresholds, spikes):
        for i, nid in enumerate(ids):
            wiring = []
            for w, weight in inputs:
                j = 0 if w.width == 1 else i
                wiring.append((int(w.ids[j]), float(weight)))
            self._neurons.append((int(nid), float(thresholds[i, 0]), float(bias), wiring))
            self._per_neuron_spikes.append(int(np.count_nonzero(spikes[i])))

    @staticmethod
    def _format_wire(wire_id: int) -> str:
        if wire_id >= 0:
            return str(wire_id)
        if wire_id == CONST0_ID:
            return "c0"
        if wire_id == CONST1_ID:
            return "c1"
        return f"x{_FIRST_INPUT_ID - wire_id}"

    def neurons(self) -> Iterable[Tuple[int, float, float, List[Tuple[int, float]]]]:
        """
        Iterate over the recorded neurons as (id, threshold, bias, [(input id, weight), ...]).
        In "gaussian" mode the recorded threshold is the one drawn for the first lane.
        """
        if self._neurons is None:
            raise RuntimeError("neuron records require a netlist constructed with record=True")
        return iter(self._neurons)

    def dump(self, fp: Optional[io.TextIOBase] = None) -> str:
        """
        Dump the recorded netlist in a line-oriented text format.

        Each line has the form `neuron <id> θ=<v> bias=<v> in=[<id>:<w>,...]`.
        Circuit inputs are named x<k>, while constant wires are named c0 and c1.
        """
        lines = []
        for nid, theta, bias, wiring in self.neurons():
            wires = ",".join(f"{self._format_wire(src)}:{w:g}" for src, w in wiring)
            lines.append(f"neuron {nid} θ={theta:g} bias={bias:g} in=[{wires}]")

        text = "\n".join(lines) + ("\n" if lines else "")
        if fp is not None:
            fp.write(text)
        return text
