# Copyright (C) 2025 spikefp contributors
#
# SPDX-License-Identifier: MIT

import math
from typing import Optional, Sequence, Tuple

import numpy as np
import numpy.typing as npt


class NeuronConfig(object):
    """
    A class used to represent the physics of an integrate-and-fire (IF) neuron.

    Setting decay to 1.0 yields the pure IF neuron, while values in (0, 1) model
    a leaky (LIF) neuron.
    The effective threshold is computed as threshold * (1 + threshold_deviation).
    """

    def __init__(
        self,
        threshold: float,
        decay: float = 1.0,
        soft_reset: bool = True,
        noise_sigma: float = 0.0,
        threshold_deviation: float = 0.0,
    ):
        """
        Parameters
        ----------
        threshold
            the firing threshold (membrane units). Must be strictly positive.
        decay
            the membrane decay factor. Should be in the (0, 1] range.
        soft_reset
            when True, the effective threshold is subtracted from the membrane after a spike.
            When False, the membrane is reset to 0.
        noise_sigma
            the standard deviation of the Gaussian noise added to the input current.
        threshold_deviation
            the fractional deviation applied to the threshold.
        """
        if not threshold > 0:
            raise ValueError("threshold must be a positive number")
        if not 0 < decay <= 1:
            raise ValueError("decay must be in the (0, 1] range")
        if not noise_sigma >= 0:
            raise ValueError("noise_sigma must be a non-negative number")
        if not math.isfinite(threshold_deviation) or threshold_deviation <= -1:
            raise ValueError("threshold_deviation must be a finite number greater than -1")

        self._threshold = float(threshold)
        self._decay = float(decay)
        self._soft_reset = bool(soft_reset)
        self._noise_sigma = float(noise_sigma)
        self._threshold_deviation = float(threshold_deviation)

    def __repr__(self) -> str:
        return (
            f"NeuronConfig(threshold={self._threshold}, decay={self._decay}, soft_reset={self._soft_reset}, "
            f"noise_sigma={self._noise_sigma}, threshold_deviation={self._threshold_deviation})"
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, NeuronConfig):
            return NotImplemented
        return (
            self._threshold == other._threshold
            and self._decay == other._decay
            and self._soft_reset == other._soft_reset
            and self._noise_sigma == other._noise_sigma
            and self._threshold_deviation == other._threshold_deviation
        )

    @property
    def threshold(self) -> float:
        return self._threshold

    @property
    def decay(self) -> float:
        return self._decay

    @property
    def soft_reset(self) -> bool:
        return self._soft_reset

    @property
    def noise_sigma(self) -> float:
        return self._noise_sigma

    @property
    def threshold_deviation(self) -> float:
        return self._threshold_deviation

    @property
    def effective_threshold(self) -> float:
        """
        The threshold after applying the fractional deviation
        """
        return self._threshold * (1.0 + self._threshold_deviation)

    def with_threshold(self, threshold: float) -> "NeuronConfig":
        """
        Return a copy of the current config with a different base threshold.
        """
        return NeuronConfig(
            threshold,
            decay=self._decay,
            soft_reset=self._soft_reset,
            noise_sigma=self._noise_sigma,
            threshold_deviation=self._threshold_deviation,
        )


class NeuronState(object):
    """
    The mutable state of a single neuron: its membrane potential and its noise stream.

    Two states constructed with the same seed produce identical noise sequences.
    """

    def __init__(self, membrane: float = 0.0, rng_seed: int = 0, rng: Optional[np.random.Generator] = None):
        self._membrane = float(membrane)
        self._seed = int(rng_seed)
        self._rng = np.random.default_rng(self._seed) if rng is None else rng

    def __repr__(self) -> str:
        return f"NeuronState(membrane={self._membrane}, rng_seed={self._seed})"

    @property
    def membrane(self) -> float:
        return self._membrane

    @property
    def rng_seed(self) -> int:
        return self._seed

    @property
    def rng(self) -> np.random.Generator:
        return self._rng


def step(state: NeuronState, config: NeuronConfig, input_current: float) -> Tuple[int, NeuronState]:
    """
    Advance a neuron by one timestep.

    Parameters
    ----------
    state
        the current neuron state
    config
        the neuron physics
    input_current
        the input current I(t)

    Returns
    -------
    Tuple[int, NeuronState]
        the spike (0 or 1) and the updated state.
        The updated state shares the noise stream of the input state.
        A NaN input current yields a NaN membrane and no spike.
    """
    current = float(input_current)
    if config.noise_sigma > 0:
        current += state.rng.normal(0.0, config.noise_sigma)

    membrane = config.decay * state.membrane + current
    theta = config.effective_threshold

    # comparisons against NaN are False
    if membrane > theta:
        membrane = membrane - theta if config.soft_reset else 0.0
        return 1, NeuronState(membrane, state.rng_seed, rng=state.rng)

    return 0, NeuronState(membrane, state.rng_seed, rng=state.rng)


def reset(state: NeuronState) -> NeuronState:
    """
    Return a fresh state: zero membrane and a noise stream rewound to the seed.
    """
    return NeuronState(0.0, state.rng_seed)


def run_steps(state: NeuronState, config: NeuronConfig, currents: Sequence[float]) -> Tuple[npt.NDArray[np.uint8], NeuronState]:
    """
    Feed a sequence of input currents to a neuron, one per timestep.

    Returns
    -------
    Tuple[npt.NDArray[np.uint8], NeuronState]
        the spike train and the final neuron state
    """
    spikes = np.zeros(len(currents), dtype=np.uint8)
    for i, current in enumerate(currents):
        spikes[i], state = step(state, config, current)

    return spikes, state


def integrate_and_fire(
    currents: npt.NDArray[np.float64],
    thresholds: npt.NDArray[np.float64] | float,
    decay: float = 1.0,
    membrane: Optional[npt.NDArray[np.float64]] = None,
    noise: Optional[npt.NDArray[np.float64]] = None,
    soft_reset: bool = True,
) -> Tuple[npt.NDArray[np.bool_], npt.NDArray[np.float64]]:
    """
    Vectorized single-timestep update for a population of neurons.

    Parameters
    ----------
    currents
        the input currents. Any shape is accepted.
    thresholds
        the effective thresholds. Must be broadcastable to currents.
    decay
        the membrane decay factor
    membrane
        the membrane potential before the update. Defaults to zero (freshly reset neurons).
    noise
        additive noise on the input current. Must be broadcastable to currents.
    soft_reset
        when True, the threshold is subtracted from the membrane of the neurons that fired.
        When False, their membrane is reset to 0.

    Returns
    -------
    Tuple[npt.NDArray[np.bool_], npt.NDArray[np.float64]]
        the spikes and the membrane potential after the update
    """
    if not 0 < decay <= 1:
        raise ValueError("decay must be in the (0, 1] range")

    v = np.asarray(currents, dtype=np.float64)
    if noise is not None:
        v = v + noise
    if membrane is not None:
        v = v + decay * membrane

    spikes = v > thresholds
    if soft_reset:
        return spikes, np.where(spikes, v - thresholds, v)
    return spikes, np.where(spikes, 0.0, v)
