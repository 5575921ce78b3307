# Copyright (C) 2025 spikefp contributors
#
# SPDX-License-Identifier: MIT

import dataclasses
import datetime
import os
from typing import Any, Dict, Optional


@dataclasses.dataclass(frozen=True)
class UlpReport:
    """
    Summary of the ULP distance between two batches of floating-point values.

    NaN-vs-NaN pairs count as matches. NaN-vs-number pairs are assigned the largest distance
    representable in the format and are also counted in nan_mismatches.
    """

    max_ulp: int
    mean_ulp: float
    zero_ulp_rate: float
    max_abs_err: float
    sample_count: int
    nan_mismatches: int = 0

    def __post_init__(self):
        if self.sample_count < 0:
            raise ValueError("sample_count must be non-negative")
        if not 0 <= self.zero_ulp_rate <= 1:
            raise ValueError("zero_ulp_rate must be in the [0, 1] range")
        if self.max_ulp < 0 or self.mean_ulp < 0 or self.mean_ulp > self.max_ulp:
            raise ValueError("ULP statistics must satisfy max_ulp >= mean_ulp >= 0")

    def within(self, budget: int) -> bool:
        return self.max_ulp <= budget

    def to_dict(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)


@dataclasses.dataclass(frozen=True)
class DepthReport:
    """
    Error of a stack of transformer blocks at one depth.

    ulp aggregates every output element of the batch, while sequence_max_ulp is the largest
    error within one sequence averaged over the batch.
    """

    depth: int
    ulp: UlpReport
    sequence_max_ulp: float

    def __post_init__(self):
        if self.depth < 1:
            raise ValueError("depth must be a positive integer")
        if not 0 <= self.sequence_max_ulp <= self.ulp.max_ulp:
            raise ValueError("sequence_max_ulp must be between 0 and max_ulp")


@dataclasses.dataclass(frozen=True)
class EnergyReport:
    """
    Spike-based energy estimate for one circuit component.

    fired_spikes is the average number of spikes per evaluation (measured mode), while
    expected_spikes assumes that half of the neurons fire (expected mode).
    """

    component: str
    neuron_count: float
    fired_spikes: Optional[float]
    expected_spikes: float
    energy_nj: float
    baseline_gpu_nj: Optional[float]
    savings_ratio: Optional[float]
    mode: str
    reference_neurons: Optional[float] = None
    unit_note: str = ""

    @property
    def spikes(self) -> float:
        return self.expected_spikes if self.mode == "expected" else self.fired_spikes

    def to_dict(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)


def _timestamp() -> str:
    # reproducible-builds convention
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch is not None:
        t = datetime.datetime.fromtimestamp(int(epoch), tz=datetime.timezone.utc)
    else:
        t = datetime.datetime.now(tz=datetime.timezone.utc)
    return t.strftime("%Y-%m-%dT%H:%M:%SZ")


@dataclasses.dataclass(frozen=True)
class RunManifest:
    """
    Provenance information embedded in every artifact written by the CLI.
    """

    command: str
    seed: int
    config_digest: str
    tool_version: str
    timestamp: str = dataclasses.field(default_factory=_timestamp)

    def to_dict(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)

    def to_comment_lines(self) -> str:
        """
        Format the manifest as a block of "# key: value" lines.
        """
        return "".join(f"# {k}: {v}\n" for k, v in self.to_dict().items())
