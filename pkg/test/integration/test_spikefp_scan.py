# Copyright (C) 2025 spikefp contributors
#
# SPDX-License-Identifier: MIT

import io
import pathlib
from contextlib import redirect_stderr, redirect_stdout

import numpy as np
import pytest

from spikefp.algorithms.fidelity import DEFAULT_DEPTH_CONFIG
from spikefp.data_structures import BlockWeights
from spikefp.io import read_table, write_block_weights

from .common import parse_csv_output, spikefp_main, write_text


def _run_scan(args):
    f = io.StringIO()
    with redirect_stdout(f):
        ec = spikefp_main(["scan", *args])
    assert ec == 0
    return parse_csv_output(f.getvalue())


@pytest.mark.end2end
class TestSpikeFPScan:
    @staticmethod
    def test_beta():
        manifest, df = _run_scan(["beta", "--targets", "and,xor", "--values", "0.5,1.0", "--trials", "2", "--repeats", "3"])
        assert manifest["command"] == "spikefp scan beta"
        assert df["target"].tolist() == ["and", "and", "xor", "xor"]
        assert df["value"].tolist() == [0.5, 1.0, 0.5, 1.0]
        assert (df["trial_mean"] == 100.0).all()
        assert (df["trials"] == 2).all()

    @staticmethod
    def test_noise_is_reproducible():
        args = ["noise", "--targets", "or", "--values", "0.3", "--trials", "3", "--repeats", "10", "--seed", "5"]
        _, a = _run_scan(args)
        _, b = _run_scan(args)
        assert a.equals(b)
        assert a["seed"].tolist() == [5]

    @staticmethod
    def test_threshold_worst_case():
        _, df = _run_scan(
            [
                "threshold",
                "--targets",
                "and",
                "--values",
                "0.5",
                "--trials",
                "1",
                "--repeats",
                "1",
                "--worst-case",
                "+",
                "--background-sigma",
                "0",
            ]
        )
        assert df["trial_mean"].tolist() == [75.0]

    @staticmethod
    def test_noise_reference_accuracy():
        _, df = _run_scan(["noise", "--targets", "adder4,mult4x4,shifter,and,xor", "--values", "0.2", "--trials", "10"])
        accuracy = dict(zip(df["target"], df["trial_mean"]))
        expected = {"adder4": 91.0, "mult4x4": 75.0, "shifter": 70.0, "and": 98.4, "xor": 98.6}
        for target, value in expected.items():
            assert abs(accuracy[target] - value) <= 2.0, target
        assert accuracy["adder4"] > accuracy["mult4x4"] > accuracy["shifter"]

    @staticmethod
    def test_threshold_reference_accuracy():
        _, df = _run_scan(["threshold", "--targets", "and,or,xor", "--values", "0.1", "--trials", "10"])
        accuracy = dict(zip(df["target"], df["trial_mean"]))
        expected = {"and": 98.0, "or": 98.0, "xor": 96.0}
        for target, value in expected.items():
            assert abs(accuracy[target] - value) <= 2.0, target
        # OR has the largest margins
        assert accuracy["or"] >= accuracy["and"] >= accuracy["xor"]

    @staticmethod
    def test_threshold_uniform_deviation():
        # uniform deviations of 10% stay within every gate margin
        args = ["threshold", "--targets", "xor", "--values", "0.1", "--trials", "2", "--deviation", "uniform"]
        _, df = _run_scan([*args, "--background-sigma", "0"])
        assert df["trial_mean"].tolist() == [100.0]

    @staticmethod
    def test_fpnoise():
        _, df = _run_scan(["fpnoise", "--targets", "fp8_add", "--values", "0", "--trials", "1", "--samples", "20"])
        assert df["parameter"].tolist() == ["fp_noise"]
        assert df["trial_mean"].tolist() == [100.0]

    @staticmethod
    def test_encoding():
        _, df = _run_scan(["encoding", "--schemes", "spatial,rate", "--steps", "8,16", "-n", "50", "--trials", "2"])
        assert df["scheme"].tolist() == ["spatial", "rate", "rate"]
        assert df["steps"].tolist() == [32, 8, 16]
        assert df["mse_mean"].iloc[0] == 0.0

    @staticmethod
    def test_depth_oracle():
        _, df = _run_scan(["depth", "--engine", "oracle", "--blocks", "2,1"])
        assert df["depth"].tolist() == [1, 2]
        assert (df["max_ulp"] >= 0).all()
        assert (df["sequence_max_ulp"] <= df["max_ulp"]).all()

    @staticmethod
    def test_depth_batch():
        manifest, df = _run_scan(["depth", "--engine", "oracle", "--blocks", "1", "--batch", "3"])
        assert df["depth"].tolist() == [1]
        default, _ = _run_scan(["depth", "--engine", "oracle", "--blocks", "1"])
        assert manifest["config_digest"] != default["config_digest"]

    @staticmethod
    def test_depth_with_weights(tmpdir):
        path = pathlib.Path(tmpdir) / "weights.json"
        write_block_weights(path, [BlockWeights.random(DEFAULT_DEPTH_CONFIG, np.random.default_rng(0))])

        manifest, df = _run_scan(["depth", "--engine", "oracle", "--blocks", "1,3", "--weights", str(path)])
        assert df["depth"].tolist() == [1, 3]
        assert len(manifest["config_digest"]) == 64

    @staticmethod
    def test_config_file(tmpdir):
        tmpdir = pathlib.Path(tmpdir)
        config = write_text(tmpdir / "scan.cfg", "# beta scan\ntargets = not\nvalues = 0.2, 0.9\ntrials = 1\nrepeats = 2\n")
        output = tmpdir / "scan.csv"

        ec = spikefp_main(["scan", "beta", "--config", str(config), "--trials", "2", "-o", str(output)])
        assert ec == 0

        manifest, df = read_table(output)
        assert manifest["command"] == "spikefp scan beta"
        assert df["target"].tolist() == ["not", "not"]
        # command line options take precedence over the config file
        assert df["trials"].tolist() == [2, 2]

    @staticmethod
    def test_invalid_values():
        with redirect_stderr(io.StringIO()):
            ec = spikefp_main(["scan", "threshold", "--targets", "and", "--values", "1.5", "--trials", "1"])
        assert ec == 2

    @staticmethod
    def test_invalid_args(tmpdir):
        config = write_text(pathlib.Path(tmpdir) / "scan.cfg", "blocks = 1\n")
        for args in (
            ["scan", "beta", "--blocks", "1"],
            ["scan", "beta", "--targets", "nand"],
            ["scan", "beta", "--targets", "all,and"],
            ["scan", "fpnoise", "--targets", "and"],
            ["scan", "noise", "--targets", "fp8_add"],
            ["scan", "encoding", "--schemes", "phase"],
            ["scan", "encoding", "--schemes", "spatial_truncated", "--steps", "40"],
            ["scan", "depth", "--engine", "gpu"],
            ["scan", "beta", "--config", str(config)],
        ):
            with pytest.raises(SystemExit) as cmd:
                with redirect_stderr(io.StringIO()):
                    spikefp_main(args)
            assert cmd.value.code == 2
