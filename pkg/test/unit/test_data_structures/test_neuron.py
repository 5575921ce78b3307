# Copyright (C) 2025 spikefp contributors
#
# SPDX-License-Identifier: MIT

import math

import numpy as np
import pytest

from spikefp.data_structures import (
    NeuronConfig,
    NeuronState,
    integrate_and_fire,
    reset,
    run_steps,
    step,
)


@pytest.mark.unit
class TestNeuronConfig:
    def test_invalid_threshold(self):
        with pytest.raises(ValueError, match="threshold must be a positive number"):
            NeuronConfig(0.0)
        with pytest.raises(ValueError, match="threshold must be a positive number"):
            NeuronConfig(-1.0)

    def test_invalid_decay(self):
        for decay in (0.0, -0.5, 1.5):
            with pytest.raises(ValueError, match=r"decay must be in the \(0, 1\] range"):
                NeuronConfig(1.0, decay=decay)

    def test_invalid_noise(self):
        with pytest.raises(ValueError, match="noise_sigma must be a non-negative number"):
            NeuronConfig(1.0, noise_sigma=-0.1)

    def test_invalid_threshold_deviation(self):
        with pytest.raises(ValueError, match="threshold_deviation"):
            NeuronConfig(1.0, threshold_deviation=-1.0)
        with pytest.raises(ValueError, match="threshold_deviation"):
            NeuronConfig(1.0, threshold_deviation=math.inf)

    def test_effective_threshold(self):
        assert NeuronConfig(1.5).effective_threshold == 1.5
        assert NeuronConfig(2.0, threshold_deviation=0.25).effective_threshold == 2.5
        assert NeuronConfig(2.0, threshold_deviation=-0.5).effective_threshold == 1.0

    def test_with_threshold(self):
        cfg = NeuronConfig(1.0, decay=0.5, soft_reset=False, noise_sigma=0.1, threshold_deviation=0.2)
        other = cfg.with_threshold(0.5)
        assert other.threshold == 0.5
        assert other.decay == 0.5
        assert not other.soft_reset
        assert other.noise_sigma == 0.1
        assert other.threshold_deviation == 0.2
        assert other.with_threshold(1.0) == cfg


@pytest.mark.unit
class TestStep:
    def test_fire_soft_reset(self):
        spike, state = step(NeuronState(), NeuronConfig(1.0), 1.5)
        assert spike == 1
        assert state.membrane == 0.5

    def test_fire_hard_reset(self):
        spike, state = step(NeuronState(), NeuronConfig(1.0, soft_reset=False), 1.5)
        assert spike == 1
        assert state.membrane == 0.0

    def test_strict_threshold(self):
        spike, state = step(NeuronState(), NeuronConfig(1.0), 1.0)
        assert spike == 0
        assert state.membrane == 1.0

    def test_leak(self):
        spike, state = step(NeuronState(membrane=1.0), NeuronConfig(1.0, decay=0.5), 0.25)
        assert spike == 0
        assert state.membrane == 0.75

    def test_nan_input(self):
        spike, state = step(NeuronState(), NeuronConfig(1.0), math.nan)
        assert spike == 0
        assert math.isnan(state.membrane)

    def test_run_steps(self):
        spikes, state = run_steps(NeuronState(), NeuronConfig(1.0), [0.5] * 5)
        assert spikes.tolist() == [0, 0, 1, 0, 1]
        assert state.membrane == 0.5

    def test_noise_is_reproducible(self):
        cfg = NeuronConfig(1.0, noise_sigma=0.5)
        currents = [0.4] * 64

        spikes1, state1 = run_steps(NeuronState(rng_seed=123), cfg, currents)
        spikes2, state2 = run_steps(NeuronState(rng_seed=123), cfg, currents)
        assert (spikes1 == spikes2).all()
        assert state1.membrane == state2.membrane

        spikes3, _ = run_steps(reset(state1), cfg, currents)
        assert (spikes1 == spikes3).all()

    def test_reset(self):
        state = reset(NeuronState(membrane=0.7, rng_seed=5))
        assert state.membrane == 0.0
        assert state.rng_seed == 5


@pytest.mark.unit
class TestIntegrateAndFire:
    def test_population(self):
        spikes, v = integrate_and_fire(np.array([0.5, 1.5, 2.0]), 1.0)
        assert spikes.tolist() == [False, True, True]
        assert v.tolist() == [0.5, 0.5, 1.0]

    def test_membrane_and_noise(self):
        spikes, v = integrate_and_fire(
            np.array([0.5, 0.5]),
            np.array([1.0, 1.0]),
            decay=0.5,
            membrane=np.array([1.0, 0.0]),
            noise=np.array([0.25, 0.0]),
        )
        assert spikes.tolist() == [True, False]
        assert v.tolist() == [0.25, 0.5]

    def test_hard_reset(self):
        spikes, v = integrate_and_fire(np.array([0.5, 1.5, 2.0]), 1.0, soft_reset=False)
        assert spikes.tolist() == [False, True, True]
        assert v.tolist() == [0.5, 0.0, 0.0]

    def test_matches_step(self):
        for soft_reset in (True, False):
            cfg = NeuronConfig(1.0, decay=0.5, soft_reset=soft_reset)
            for current in (0.25, 1.25, 3.0):
                spike, state = step(NeuronState(membrane=0.5), cfg, current)
                spikes, v = integrate_and_fire(
                    np.array([current]), 1.0, decay=0.5, membrane=np.array([0.5]), soft_reset=soft_reset
                )
                assert int(spikes[0]) == spike
                assert v[0] == state.membrane

    def test_invalid_decay(self):
        with pytest.raises(ValueError, match="decay"):
            integrate_and_fire(np.zeros(3), 1.0, decay=0.0)
