# Copyright (C) 2025 spikefp contributors
#
# SPDX-License-Identifier: MIT

"""
Accuracy of spiking circuits under non-ideal neuron physics.

Every scan compares the output of a circuit built with degraded neurons against the output of
the same circuit built with ideal neurons, lane by lane.
"""

import dataclasses
import itertools
import math
import re
import time
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
import numpy.typing as npt
import pandas as pd
import structlog

from spikefp.algorithms.fparith import FpUnit
from spikefp.algorithms.gates import and_, mux_, not_, or_, xor_
from spikefp.algorithms.intarith import barrel_shift, ripple_add, ripple_array_multiply
from spikefp.data_structures import (
    DEVIATION_MODES,
    BitWord,
    GateNetlist,
    NeuronConfig,
    PrecisionFormat,
    ProcessPoolWrapper,
    concat,
)
from spikefp.utils import derive_rng, pretty_format_elapsed_time

SCAN_PARAMETERS = ("beta", "noise_sigma", "threshold_delta", "fp_noise")
DEFAULT_TARGETS = ("and", "or", "xor", "not", "adder4", "mult4x4", "shifter")
FP_OPS = ("add", "sub", "mul", "div")

SCAN_COLUMNS = ["target", "parameter", "value", "trial_mean", "trial_std", "trials", "seed", "bit_accuracy"]

# widths of the alignment shifter datapaths and of their shift amount
_SHIFTER_WIDTH = 21
_WIDE_SHIFTER_WIDTH = 28
_SHIFTER_AMOUNT_BITS = 5

# share of the scanned noise reaching the membrane, and the membrane noise floor
NOISE_COUPLING = 0.62
BACKGROUND_SIGMA = 0.13

_FP_TARGET = re.compile(r"^fp(8|16|32)_(add|sub|mul|div)$")


@dataclasses.dataclass(frozen=True)
class ScanTarget:
    """
    A circuit under test.

    widths lists the width of each operand, draw produces one batch of operands (as unsigned
    integers) and build wires the circuit, returning the word whose bits are compared.
    """

    name: str
    widths: Tuple[int, ...]
    draw: Callable[[np.random.Generator, int, int], List[npt.NDArray[np.uint64]]]
    build: Callable[[GateNetlist, Sequence[BitWord]], BitWord]


def _exhaustive(widths: Sequence[int], repeats: int = 1) -> List[npt.NDArray[np.uint64]]:
    grid = itertools.product(*(range(1 << w) for w in widths))
    cols = np.array(list(grid), dtype=np.uint64).T
    return [np.tile(c, repeats) for c in cols]


def _tiled(widths: Sequence[int]):
    """
    Draw the exhaustive input set, repeated until it covers at least the requested number of samples.
    """
    combos = 1 << sum(widths)

    def draw(rng, samples, repeats):
        return _exhaustive(widths, max(1, math.ceil(samples / combos)))

    return draw


def _gate_target(name: str, fn, arity: int) -> ScanTarget:
    def draw(rng, samples, repeats):
        return _exhaustive((1,) * arity, repeats)

    return ScanTarget(name, (1,) * arity, draw, lambda c, words: fn(c, *words))


def _adder4(c: GateNetlist, words: Sequence[BitWord]) -> BitWord:
    s, cout = ripple_add(c, words[0], words[1], words[2])
    return concat([s, cout])


def _shifter(c: GateNetlist, words: Sequence[BitWord]) -> BitWord:
    x, sticky = barrel_shift(c, words[0], words[1], "right")
    return concat([x, sticky])


def _draw_shifter(width: int):
    def draw(rng: np.random.Generator, samples: int, repeats: int) -> List[npt.NDArray[np.uint64]]:
        x = rng.integers(0, 1 << width, size=samples, dtype=np.uint64)
        amount = rng.integers(0, 1 << _SHIFTER_AMOUNT_BITS, size=samples, dtype=np.uint64)
        return [x, amount]

    return draw


def _fp_target(name: str, fmt: PrecisionFormat, op: str) -> ScanTarget:
    n = fmt.bit_width

    def draw(rng, samples, repeats):
        return [rng.integers(0, 1 << n, size=samples, dtype=np.uint64) for _ in range(2)]

    def build(c, words):
        return getattr(FpUnit(c, fmt), op)(*words)

    return ScanTarget(name, (n, n), draw, build)


_TARGETS = {
    "and": _gate_target("and", and_, 2),
    "or": _gate_target("or", or_, 2),
    "xor": _gate_target("xor", xor_, 2),
    "not": _gate_target("not", not_, 1),
    "mux": _gate_target("mux", mux_, 3),
    "adder4": ScanTarget("adder4", (4, 4, 1), _tiled((4, 4, 1)), _adder4),
    "mult4x4": ScanTarget("mult4x4", (4, 4), _tiled((4, 4)), lambda c, w: ripple_array_multiply(c, *w)),
    "shifter": ScanTarget("shifter", (_SHIFTER_WIDTH, _SHIFTER_AMOUNT_BITS), _draw_shifter(_SHIFTER_WIDTH), _shifter),
    "shifter28": ScanTarget(
        "shifter28", (_WIDE_SHIFTER_WIDTH, _SHIFTER_AMOUNT_BITS), _draw_shifter(_WIDE_SHIFTER_WIDTH), _shifter
    ),
}


def get_target(name: str) -> ScanTarget:
    """
    Look up a scan target: a gate (and, or, xor, not, mux), adder4, mult4x4, shifter, shifter28 or
    a floating-point operator named fp<bits>_<op> (e.g. fp8_add).
    """
    key = name.strip().lower()
    if key in _TARGETS:
        return _TARGETS[key]
    m = _FP_TARGET.match(key)
    if m is None:
        raise ValueError(f'unknown scan target "{name}"')
    return _fp_target(key, PrecisionFormat.from_name(f"fp{m.group(1)}"), m.group(2))


def is_fp_target(name: str) -> bool:
    return _FP_TARGET.match(name.strip().lower()) is not None


@dataclasses.dataclass(frozen=True)
class ScanConfig:
    """
    Parameters of a robustness scan over a single target.

    Parameters
    ----------
    parameter
        the physical parameter being scanned: one of "beta", "noise_sigma", "threshold_delta" or "fp_noise"
    values
        the values taken by the parameter
    trials
        number of independent repetitions for each value
    seed
        the seed from which every trial derives its random stream
    target
        the name of the circuit under test (see get_target())
    repeats
        how many times the exhaustive input set of a single gate is repeated within a trial
    samples
        number of operands per trial. Exhaustive input sets of integer circuits are repeated
        until they cover at least this many lanes.
    noise_coupling
        the fraction of the scanned noise level reaching the membrane of a neuron
    background_sigma
        the membrane noise floor present during noise and threshold scans.
        It adds in quadrature to the coupled noise level.
    deviation_mode
        how process deviations are assigned (see GateNetlist): "gaussian", "uniform", "worst+" or "worst-"
    """

    parameter: str
    values: Tuple[float, ...]
    trials: int = 10
    seed: int = 0
    target: str = "and"
    repeats: int = 250
    samples: int = 1000
    noise_coupling: float = NOISE_COUPLING
    background_sigma: float = BACKGROUND_SIGMA
    deviation_mode: str = "gaussian"

    def __post_init__(self):
        if self.parameter not in SCAN_PARAMETERS:
            raise ValueError(f'unknown scan parameter "{self.parameter}"')
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if len(self.values) == 0:
            raise ValueError("values cannot be empty")
        if self.trials < 1:
            raise ValueError("trials must be a positive integer")
        if self.repeats < 1 or self.samples < 1:
            raise ValueError("repeats and samples must be positive integers")
        if self.background_sigma < 0:
            raise ValueError("background_sigma must be a non-negative number")
        if not self.noise_coupling > 0:
            raise ValueError("noise_coupling must be a positive number")
        if self.deviation_mode not in DEVIATION_MODES:
            raise ValueError(f"deviation_mode must be one of {', '.join(DEVIATION_MODES)}")
        get_target(self.target)

        if self.parameter == "beta" and any(not 0 < v <= 1 for v in self.values):
            raise ValueError("beta values must be in the (0, 1] range")
        if self.parameter in {"noise_sigma", "fp_noise"} and any(v < 0 for v in self.values):
            raise ValueError("noise levels must be non-negative")
        if self.parameter == "threshold_delta" and any(not 0 <= v < 1 for v in self.values):
            raise ValueError("threshold deviations must be in the [0, 1) range")
        if self.parameter == "fp_noise" and not is_fp_target(self.target):
            raise ValueError(f'fp_noise scans require a floating-point target (found "{self.target}")')


@dataclasses.dataclass(frozen=True)
class _TrialJob:
    config: ScanConfig
    value: float
    trial: int


def _neuron_config(config: ScanConfig, value: float) -> NeuronConfig:
    if config.parameter == "beta":
        return NeuronConfig(1.0, decay=value)
    if config.parameter == "noise_sigma":
        return NeuronConfig(1.0, noise_sigma=math.hypot(config.noise_coupling * value, config.background_sigma))
    if config.parameter == "threshold_delta":
        return NeuronConfig(1.0, noise_sigma=config.background_sigma, threshold_deviation=value)
    return NeuronConfig(1.0)


def _flip_bits(values: npt.NDArray[np.uint64], width: int, p: float, rng: np.random.Generator):
    flips = rng.random((width, len(values))) < p
    mask = (flips.astype(np.uint64) << np.arange(width, dtype=np.uint64)[:, np.newaxis]).sum(axis=0, dtype=np.uint64)
    return values ^ mask


def _evaluate(target: ScanTarget, operands, netlist: GateNetlist) -> npt.NDArray[np.bool_]:
    words = [netlist.input_word(x, w) for x, w in zip(operands, target.widths)]
    return target.build(netlist, words).broadcast(netlist.lanes).values


def run_trial(job: _TrialJob) -> Tuple[float, float]:
    """
    Run one trial and return the word-level and bit-level accuracy (in %).
    """
    config = job.config
    target = get_target(config.target)
    rng = derive_rng(config.seed, job.trial, job.value)

    operands = target.draw(rng, config.samples, config.repeats)
    lanes = len(operands[0])
    ideal = _evaluate(target, operands, GateNetlist(lanes=lanes))

    if config.parameter == "fp_noise":
        # operand bits are flipped with probability sigma^2
        operands = [_flip_bits(x, w, job.value**2, rng) for x, w in zip(operands, target.widths)]

    netlist = GateNetlist(
        lanes=lanes,
        config=_neuron_config(config, job.value),
        seed=int(rng.integers(0, 2**63)),
        deviation_mode=config.deviation_mode,
    )
    got = _evaluate(target, operands, netlist)

    matches = got == ideal
    return 100.0 * float(matches.all(axis=0).mean()), 100.0 * float(matches.mean())


def run_scan(config: ScanConfig, pool: Optional[ProcessPoolWrapper] = None, progress=None) -> pd.DataFrame:
    """
    Run all (value, trial) combinations of a scan.

    Parameters
    ----------
    config
        the scan configuration
    pool
        the pool used to run trials. Trials run in the calling process when not provided.
    progress
        optional callback invoked with the number of completed trials

    Returns
    -------
    pd.DataFrame
        one row per value with columns target, parameter, value, trial_mean, trial_std, trials, seed, bit_accuracy
    """
    logger = structlog.get_logger().bind(step="scan", target=config.target)
    t0 = time.time()

    jobs = [_TrialJob(config, v, t) for v in config.values for t in range(config.trials)]
    mapper = map if pool is None else pool.map
    results = []
    for res in mapper(run_trial, jobs):
        results.append(res)
        if progress is not None:
            progress(1)

    acc = np.array(results, dtype=np.float64).reshape(len(config.values), config.trials, 2)
    rows = []
    for i, v in enumerate(config.values):
        rows.append(
            {
                "target": config.target,
                "parameter": config.parameter,
                "value": v,
                "trial_mean": acc[i, :, 0].mean(),
                "trial_std": acc[i, :, 0].std(ddof=1) if config.trials > 1 else 0.0,
                "trials": config.trials,
                "seed": config.seed,
                "bit_accuracy": acc[i, :, 1].mean(),
            }
        )
        logger.debug("%s=%g: accuracy %.3f%%", config.parameter, v, rows[-1]["trial_mean"])

    logger.info("scanning %d value(s) took %s", len(config.values), pretty_format_elapsed_time(t0))
    return pd.DataFrame(rows, columns=SCAN_COLUMNS)


def _require(config: ScanConfig, parameter: str):
    if config.parameter != parameter:
        raise ValueError(f'expected a scan over "{parameter}", found "{config.parameter}"')


def run_beta_scan(config: ScanConfig, pool: Optional[ProcessPoolWrapper] = None, progress=None) -> pd.DataFrame:
    _require(config, "beta")
    return run_scan(config, pool, progress)


def run_noise_scan(config: ScanConfig, pool: Optional[ProcessPoolWrapper] = None, progress=None) -> pd.DataFrame:
    _require(config, "noise_sigma")
    return run_scan(config, pool, progress)


def run_threshold_scan(config: ScanConfig, pool: Optional[ProcessPoolWrapper] = None, progress=None) -> pd.DataFrame:
    _require(config, "threshold_delta")
    return run_scan(config, pool, progress)


def run_fp_noise_scan(config: ScanConfig, pool: Optional[ProcessPoolWrapper] = None, progress=None) -> pd.DataFrame:
    _require(config, "fp_noise")
    return run_scan(config, pool, progress)
