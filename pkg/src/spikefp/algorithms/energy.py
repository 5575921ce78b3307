# Copyright (C) 2025 spikefp contributors
#
# SPDX-License-Identifier: MIT

"""
Spike-based energy accounting: E = N_spikes * 23.6 pJ.

Two modes are supported: measured (spikes actually fired on a workload) and expected
(half of the neurons fire).
"""

import dataclasses
import importlib.resources
import io
import math
import pathlib
import time
import zlib
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
import numpy.typing as npt
import pandas as pd
import structlog

from spikefp.algorithms.fparith import FpUnit
from spikefp.algorithms.gates import and_, full_adder, mux_, not_, or_, xor_
from spikefp.algorithms.layers import linear_word, rmsnorm_word
from spikefp.algorithms.nonlinear import (
    exp_word,
    gelu_word,
    sigmoid_word,
    silu_word,
    sincos_word,
    softmax_word,
    tanh_word,
)
from spikefp.algorithms.reference import f32_patterns
from spikefp.data_structures import (
    BitWord,
    EnergyReport,
    GateNetlist,
    LinearWeights,
    PrecisionFormat,
    TransformerBlockConfig,
    concat,
)
from spikefp.utils import derive_rng, parse_key_value, pretty_format_elapsed_time

# energy of a single synaptic operation (nJ)
SPIKE_ENERGY_NJ = 23.6e-3

ENERGY_MODES = ("measured", "expected")
TABLE_COLUMNS = ["component", "neurons", "spikes", "energy_nj", "baseline_nj", "savings", "reference_neurons", "note"]

_FP32 = PrecisionFormat.FP32
_ROW_DIM = 256
_LINEAR_DIM = 64


@dataclasses.dataclass(frozen=True)
class Component:
    """
    A circuit whose energy can be estimated.

    workload draws the operands for a number of evaluations (as unsigned integers, one array per operand),
    while build wires the circuit and returns its output word.
    Row components evaluate whole rows at once: their counts are reported per unit_lanes output lanes
    and their neuron count is the number of neuron instances per reported unit.
    """

    name: str
    label: str
    widths: Sequence[int]
    workload: Callable[[np.random.Generator, int], List[npt.NDArray[np.uint64]]]
    build: Callable[[GateNetlist, Sequence[BitWord]], BitWord]
    row: bool = False
    unit_lanes: int = 1
    lanes_per_evaluation: int = 1


def _bits(arity: int, firing: bool = False):
    def draw(rng, n):
        if firing:
            return [np.ones(n, dtype=np.uint64) for _ in range(arity)]
        return [rng.integers(0, 2, size=n, dtype=np.uint64) for _ in range(arity)]

    return draw


def _normal_f32(arity: int, per_evaluation: int = 1):
    def draw(rng, n):
        return [
            f32_patterns(rng.standard_normal(n * per_evaluation).astype(np.float32)).astype(np.uint64)
            for _ in range(arity)
        ]

    return draw


def _fp(op: str):
    return lambda c, words: getattr(FpUnit(c, _FP32), op)(*words)


def _nonlinear(fn):
    return lambda c, words: fn(FpUnit(c, _FP32), words[0])


def _sincos(c: GateNetlist, words: Sequence[BitWord]) -> BitWord:
    return concat(list(sincos_word(FpUnit(c, _FP32), words[0])))


def _rmsnorm(c: GateNetlist, words: Sequence[BitWord]) -> BitWord:
    rows = words[0].lanes // _ROW_DIM
    eps = TransformerBlockConfig(_ROW_DIM, 1, 1, 1).eps_value
    gamma = np.ones(_ROW_DIM, dtype=np.float32)
    return rmsnorm_word(FpUnit(c, _FP32), words[0], rows, _ROW_DIM, gamma, eps)


def _softmax(c: GateNetlist, words: Sequence[BitWord]) -> BitWord:
    return softmax_word(FpUnit(c, _FP32), words[0], words[0].lanes // _ROW_DIM, _ROW_DIM)


def _linear(c: GateNetlist, words: Sequence[BitWord]) -> BitWord:
    weights = LinearWeights.random(_LINEAR_DIM, _LINEAR_DIM, derive_rng(0, _LINEAR_DIM))
    return linear_word(FpUnit(c, _FP32), words[0], words[0].lanes // _LINEAR_DIM, weights)


def _embedding(c: GateNetlist, words: Sequence[BitWord]) -> BitWord:
    # one neuron per stored bit-plane, read once
    return c.neuron_layer([(words[0], 1.0)], bias=0.0, threshold=0.5)


COMPONENTS: Dict[str, Component] = {
    c.name: c
    for c in (
        Component("and", "AND", (1, 1), _bits(2, firing=True), lambda c, w: and_(c, *w)),
        Component("or", "OR", (1, 1), _bits(2, firing=True), lambda c, w: or_(c, *w)),
        Component("not", "NOT", (1,), _bits(1), lambda c, w: not_(c, *w)),
        Component("xor", "XOR", (1, 1), _bits(2), lambda c, w: xor_(c, *w)),
        Component("mux", "MUX", (1, 1, 1), _bits(3), lambda c, w: mux_(c, *w)),
        Component("full_adder", "Full Adder", (1, 1, 1), _bits(3), lambda c, w: concat(list(full_adder(c, *w)))),
        Component("fp32_add", "FP32 Adder", (32, 32), _normal_f32(2), _fp("add")),
        Component("fp32_mul", "FP32 Multiplier", (32, 32), _normal_f32(2), _fp("mul")),
        Component("fp32_div", "FP32 Divider", (32, 32), _normal_f32(2), _fp("div")),
        Component("fp32_reciprocal", "FP32 Reciprocal", (32,), _normal_f32(1), _fp("reciprocal")),
        Component("fp32_sqrt", "FP32 Square Root", (32,), _normal_f32(1), _fp("sqrt")),
        Component("exp", "Exp", (32,), _normal_f32(1), _nonlinear(exp_word)),
        Component("sigmoid", "Sigmoid", (32,), _normal_f32(1), _nonlinear(sigmoid_word)),
        Component("tanh", "Tanh", (32,), _normal_f32(1), _nonlinear(tanh_word)),
        Component("sincos", "Sin / Cos", (32,), _normal_f32(1), _sincos),
        Component("silu", "SiLU", (32,), _normal_f32(1), _nonlinear(silu_word)),
        Component("gelu", "GELU", (32,), _normal_f32(1), _nonlinear(gelu_word)),
        Component("rmsnorm", "RMSNorm", (32,), _normal_f32(1, _ROW_DIM), _rmsnorm, True, 1, _ROW_DIM),
        Component("softmax_256", "Softmax (seq=256)", (32,), _normal_f32(1, _ROW_DIM), _softmax, True, _ROW_DIM, _ROW_DIM),
        Component("linear_64", "Linear (64x64)", (32,), _normal_f32(1, _LINEAR_DIM), _linear, True, 1, _LINEAR_DIM),
        Component("embedding", "Embedding Lookup", (32,), _normal_f32(1), _embedding),
    )
}


def get_component(name: str) -> Component:
    try:
        return COMPONENTS[name.strip().lower()]
    except KeyError:
        raise ValueError(f'unknown component "{name}"') from None


def _read_data_file(name: str, path: Optional[pathlib.Path]) -> str:
    if path is None:
        return importlib.resources.files("spikefp.data").joinpath(name).read_text()
    return pathlib.Path(path).read_text()


def load_baseline(path: Optional[pathlib.Path] = None) -> Dict[str, float]:
    """
    Load the per-operation GPU energy costs (nJ) from a "component = nJ" file.
    The table shipped with spikefp is used when path is not provided.
    """
    baseline = {}
    for key, value in parse_key_value(_read_data_file("baseline_gpu.cfg", path)).items():
        try:
            cost = float(value)
        except ValueError:
            raise ValueError(f'baseline cost for "{key}" is not a number: "{value}"') from None
        if not math.isfinite(cost) or cost <= 0:
            raise ValueError(f'baseline cost for "{key}" must be a positive number')
        baseline[key] = cost
    return baseline


def load_reference_components(path: Optional[pathlib.Path] = None) -> pd.DataFrame:
    """
    Load the published neuron count, active spikes and energy of each component.
    """
    df = pd.read_csv(io.StringIO(_read_data_file("reference_components.tsv", path)), sep="\t", comment="#")
    return df.set_index("component")


def _unit_scale(reference: Optional[pd.Series]) -> float:
    """
    Power-of-ten factor between spikes * 23.6 pJ and the published energy of a component.
    """
    if reference is None or reference["loihi_nj"] <= 0:
        return 1.0
    ratio = reference["spikes"] * SPIKE_ENERGY_NJ / reference["loihi_nj"]
    return float(10 ** round(math.log10(ratio)))


def _report(
    component: Component,
    neurons: float,
    fired: Optional[float],
    mode: str,
    baseline: Optional[Dict[str, float]],
    reference: Optional[pd.DataFrame],
) -> EnergyReport:
    expected = 0.5 * neurons
    spikes = expected if mode == "expected" else fired
    energy = spikes * SPIKE_ENERGY_NJ

    ref = None
    if reference is not None and component.name in reference.index:
        ref = reference.loc[component.name]

    baseline_nj = None if baseline is None else baseline.get(component.name)
    savings = None
    note = ""
    if baseline_nj is not None and energy > 0:
        scale = _unit_scale(ref)
        savings = baseline_nj * scale / energy
        if scale != 1:
            note = f"published energy is {scale:g}x below spikes x 23.6 pJ; savings follow the published convention"

    return EnergyReport(
        component=component.name,
        neuron_count=float(neurons),
        fired_spikes=None if fired is None else float(fired),
        expected_spikes=expected,
        energy_nj=energy,
        baseline_gpu_nj=baseline_nj,
        savings_ratio=savings,
        mode=mode,
        reference_neurons=None if ref is None else float(ref["neurons"]),
        unit_note=note,
    )


def _run(component: Component, operands: Sequence[npt.NDArray[np.uint64]]):
    lanes = len(operands[0])
    c = GateNetlist(lanes=lanes)
    words = [c.input_word(x, w) for x, w in zip(operands, component.widths)]
    out = component.build(c, words)
    units = max(out.broadcast(lanes).lanes // component.unit_lanes, 1) if component.row else lanes
    neurons = c.neuron_instances / units if component.row else c.neuron_count
    return neurons, c.spike_count / units


def measure_energy(
    component: Component | str,
    workload: Optional[Sequence[npt.ArrayLike]] = None,
    evaluations: int = 256,
    seed: int = 0,
    baseline: Optional[Dict[str, float]] = None,
    reference: Optional[pd.DataFrame] = None,
) -> EnergyReport:
    """
    Run a workload through a component and convert the spikes it fired into energy.

    Parameters
    ----------
    component
        the component (or its name)
    workload
        the operands, one array of unsigned integers per circuit input.
        When not provided, the default workload of the component is drawn.
    evaluations
        the size of the default workload
    seed
        seed used to draw the default workload
    baseline
        GPU costs used to compute the savings ratio
    reference
        published counts reported beside the measured ones

    Returns
    -------
    EnergyReport
        spike and energy figures averaged over the evaluations
    """
    if isinstance(component, str):
        component = get_component(component)

    if workload is None:
        if evaluations < 1:
            raise ValueError("evaluations must be a positive integer")
        rng = derive_rng(seed, zlib.crc32(component.name.encode()))
        workload = component.workload(rng, evaluations)

    workload = [np.asarray(x).reshape(-1).astype(np.uint64) for x in workload]
    if len(workload) != len(component.widths):
        raise ValueError(f"{component.name} expects {len(component.widths)} operand(s), found {len(workload)}")
    if len(workload[0]) == 0:
        raise ValueError("workload cannot be empty")
    if len({len(x) for x in workload}) != 1:
        raise ValueError("all operands must have the same number of values")

    neurons, spikes = _run(component, workload)
    return _report(component, neurons, spikes, "measured", baseline, reference)


def expected_energy(
    component: Component | str,
    baseline: Optional[Dict[str, float]] = None,
    reference: Optional[pd.DataFrame] = None,
) -> EnergyReport:
    """
    Estimate the energy of a component assuming that half of its neurons fire.
    The circuit is built on a single evaluation of zero operands to count its neurons.
    """
    if isinstance(component, str):
        component = get_component(component)

    operands = [np.zeros(component.lanes_per_evaluation, dtype=np.uint64) for _ in component.widths]
    neurons, _ = _run(component, operands)
    return _report(component, neurons, None, "expected", baseline, reference)


def emit_component_table(
    mode: str = "measured",
    components: Optional[Sequence[str]] = None,
    evaluations: int = 256,
    seed: int = 0,
    baseline_path: Optional[pathlib.Path] = None,
    progress=None,
) -> pd.DataFrame:
    """
    Build every component and tabulate neuron counts, spikes, energy and savings versus the GPU baseline.

    Returns
    -------
    pd.DataFrame
        one row per component with columns component, neurons, spikes, energy_nj, baseline_nj,
        savings, reference_neurons and note
    """
    if mode not in ENERGY_MODES:
        raise ValueError(f'unknown energy mode "{mode}"')

    logger = structlog.get_logger().bind(step="energy")
    baseline = load_baseline(baseline_path)
    reference = load_reference_components()
    names = list(COMPONENTS) if components is None else list(components)

    rows = []
    for name in names:
        t0 = time.time()
        if mode == "measured":
            report = measure_energy(name, evaluations=evaluations, seed=seed, baseline=baseline, reference=reference)
        else:
            report = expected_energy(name, baseline=baseline, reference=reference)
        logger.debug("%s: %g neurons, %g spikes (%s)", name, report.neuron_count, report.spikes, pretty_format_elapsed_time(t0))
        if progress is not None:
            progress(1)
        rows.append(
            {
                "component": report.component,
                "neurons": report.neuron_count,
                "spikes": report.spikes,
                "energy_nj": report.energy_nj,
                "baseline_nj": report.baseline_gpu_nj,
                "savings": report.savings_ratio,
                "reference_neurons": report.reference_neurons,
                "note": report.unit_note,
            }
        )

    return pd.DataFrame(rows, columns=TABLE_COLUMNS)
