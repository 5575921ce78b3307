# Copyright (C) 2025 spikefp contributors
#
# SPDX-License-Identifier: MIT

from .neuron import NeuronConfig, NeuronState, integrate_and_fire, reset, run_steps, step  # isort:skip
from .bitplane import BitPlaneTensor, PrecisionFormat  # isort:skip
from .netlist import DEVIATION_MODES, BitWord, GateNetlist, concat, repeat_bit  # isort:skip
from .reports import DepthReport, EnergyReport, RunManifest, UlpReport
from .weights import BlockWeights, LinearWeights, TransformerBlockConfig

from .concurrent import ProcessPoolWrapper  # isort: skip
