# Copyright (C) 2025 spikefp contributors
#
# SPDX-License-Identifier: MIT

import numpy as np
import pytest
from test_helpers_patterns import f32, normal_f32

from spikefp.algorithms import fidelity
from spikefp.data_structures import BitPlaneTensor, PrecisionFormat, TransformerBlockConfig

FP8 = PrecisionFormat.FP8_E4M3
FP16 = PrecisionFormat.FP16
FP32 = PrecisionFormat.FP32


@pytest.mark.unit
class TestUlpDistance:
    @staticmethod
    def test_adjacent_values():
        one = int(f32(1.0)[0])
        assert fidelity.ulp_distance(one, one + 1) == 1
        assert fidelity.ulp_distance(one + 1, one) == 1
        assert fidelity.ulp_distance(one, one) == 0

    @staticmethod
    def test_signed_zeros():
        assert fidelity.ulp_distance(0, FP32.sign_mask) == 0

    @staticmethod
    def test_across_zero():
        # the smallest positive and negative denormals are two steps apart
        assert fidelity.ulp_distance(1, 1 | FP32.sign_mask) == 2
        one = int(f32(1.0)[0])
        assert fidelity.ulp_distance(one, one | FP32.sign_mask) == 2 * one

    @staticmethod
    def test_infinities():
        assert fidelity.ulp_distance(FP32.positive_inf, FP32.positive_inf - 1) == 1
        assert fidelity.ulp_distance(FP32.positive_inf, FP32.positive_inf | FP32.sign_mask) == fidelity.max_ulp(FP32)

    @staticmethod
    def test_other_formats():
        assert fidelity.ulp_distance(0x3C00, 0x3C01, FP16) == 1
        assert fidelity.max_ulp(FP8) == 2 * 0x78

    @staticmethod
    def test_nan_operands():
        with pytest.raises(ValueError, match="undefined for NaN"):
            fidelity.ulp_distance(FP32.canonical_nan, 0)

    @staticmethod
    def test_element_wise_nan_handling():
        nan = FP32.canonical_nan
        got = np.array([nan, nan, 0, 0x7F800001], dtype=np.uint32)
        want = np.array([nan, 0, nan, nan], dtype=np.uint32)
        d = fidelity.ulp_distances(got, want)
        assert d.tolist() == [0, fidelity.max_ulp(), fidelity.max_ulp(), 0]

    @staticmethod
    def test_shape_mismatch():
        with pytest.raises(ValueError, match="shape mismatch"):
            fidelity.ulp_distances(np.zeros(2, dtype=np.uint32), np.zeros(3, dtype=np.uint32))


@pytest.mark.unit
class TestCompareTensors:
    @staticmethod
    def test_identical():
        t = BitPlaneTensor.from_patterns(FP32, f32(1.0, -2.5, 3.0))
        report = fidelity.compare_tensors(t, t)
        assert report.max_ulp == 0
        assert report.mean_ulp == 0
        assert report.zero_ulp_rate == 1.0
        assert report.max_abs_err == 0.0
        assert report.sample_count == 3
        assert report.within(0)

    @staticmethod
    def test_statistics():
        got = f32(1.0, 2.0, 4.0, 8.0)
        want = got.copy()
        want[1] += 1
        want[3] += 3
        report = fidelity.compare_tensors(got, want, FP32)
        assert report.max_ulp == 3
        assert report.mean_ulp == pytest.approx(1.0)
        assert report.zero_ulp_rate == pytest.approx(0.5)
        assert report.max_abs_err == pytest.approx(3 * 2.0**-20)
        assert not report.within(2)

    @staticmethod
    def test_nan_mismatches():
        got = np.array([FP32.canonical_nan, 0], dtype=np.uint32)
        want = np.array([0, 0], dtype=np.uint32)
        report = fidelity.compare_tensors(got, want, FP32)
        assert report.nan_mismatches == 1
        assert report.max_ulp == fidelity.max_ulp(FP32)
        assert report.max_abs_err == 0.0

    @staticmethod
    def test_empty():
        report = fidelity.compare_tensors(np.zeros(0, dtype=np.uint32), np.zeros(0, dtype=np.uint32), FP32)
        assert report.sample_count == 0
        assert report.zero_ulp_rate == 1.0

    @staticmethod
    def test_invalid_arguments():
        with pytest.raises(TypeError, match="fmt is required"):
            fidelity.compare_tensors(f32(1.0), f32(1.0))

        a = BitPlaneTensor.from_patterns(FP32, f32(1.0))
        b = BitPlaneTensor.from_patterns(FP16, np.array([0x3C00], dtype=np.uint16))
        with pytest.raises(ValueError, match="format mismatch"):
            fidelity.compare_tensors(a, b)

        c = BitPlaneTensor.from_patterns(FP32, f32(1.0, 2.0))
        with pytest.raises(ValueError, match="shape mismatch"):
            fidelity.compare_tensors(a, c)


@pytest.mark.unit
class TestEvaluateOperator:
    @staticmethod
    def test_registry():
        for name in ("fp_add", "fp_div", "fp_sqrt", "exp", "softmax", "rmsnorm", "linear"):
            assert name in fidelity.OPERATORS
        assert fidelity.get_operator("fp_mul").name == "fp_mul"
        with pytest.raises(ValueError, match="unknown operator"):
            fidelity.get_operator("fp_pow")

    @staticmethod
    @pytest.mark.parametrize("fmt", [FP8, FP16, FP32])
    def test_arithmetic_is_exact(fmt):
        report = fidelity.evaluate_operator(fidelity.get_operator("fp_mul"), samples=300, seed=0, fmt=fmt)
        assert report.sample_count == 300
        assert report.max_ulp == 0

    @staticmethod
    def test_nonlinear_matches_composition():
        report = fidelity.evaluate_operator(fidelity.get_operator("sigmoid"), samples=64, seed=1)
        assert report.max_ulp == 0

    @staticmethod
    def test_single_rounding_operators_are_exact():
        for name in ("fp_rsqrt", "fp_mul3"):
            report = fidelity.evaluate_operator(fidelity.get_operator(name), samples=512, seed=5)
            assert report.max_ulp == 0, name
        assert fidelity.get_operator("fp_rsqrt").ulp_budget("composition", div_correction=False) == 1

    @staticmethod
    def test_progress_callback():
        calls = []
        fidelity.evaluate_operator(fidelity.get_operator("fp_add"), samples=10, seed=3, fmt=FP8, progress=calls.append)
        assert sum(calls) == 10

    @staticmethod
    def test_seeded():
        op = fidelity.get_operator("fp_div")
        a = fidelity.evaluate_operator(op, samples=50, seed=4, fmt=FP16, div_correction=False)
        b = fidelity.evaluate_operator(op, samples=50, seed=4, fmt=FP16, div_correction=False)
        assert a == b
        assert a.max_ulp <= op.ulp_budget("composition", div_correction=False)

    @staticmethod
    def test_budgets():
        div = fidelity.get_operator("fp_div")
        assert div.ulp_budget("composition") == 0
        assert div.ulp_budget("composition", div_correction=False) == 1
        assert fidelity.get_operator("tanh").ulp_budget("libm") is None

    @staticmethod
    def test_invalid_arguments():
        op = fidelity.get_operator("exp")
        with pytest.raises(ValueError, match="samples must be"):
            fidelity.evaluate_operator(op, samples=0, seed=0)
        with pytest.raises(ValueError, match="does not support"):
            fidelity.evaluate_operator(op, samples=1, seed=0, fmt=FP16)
        with pytest.raises(ValueError, match="unknown reference"):
            fidelity.evaluate_operator(op, samples=1, seed=0, reference_name="mpfr")


# samples per operator: elements for element-wise operators, rows otherwise (at least 1024 outputs each)
_FUSED_SAMPLES = {
    "exp": 1024,
    "sigmoid": 1024,
    "silu": 1024,
    "gelu": 1024,
    "sin": 1024,
    "cos": 1024,
    "softmax": 128,
    "rmsnorm": 256,
    "linear": 16,
}

_EXACT_RATES = {"softmax": 0.80, "rmsnorm": 0.70}


@pytest.mark.unit
class TestFusedBudgets:
    @staticmethod
    @pytest.mark.parametrize("name", sorted(_FUSED_SAMPLES))
    def test_within_budget(name):
        op = fidelity.get_operator(name)
        report = fidelity.evaluate_operator(op, samples=_FUSED_SAMPLES[name], seed=11, reference_name="fused")
        assert report.sample_count >= 1024
        assert report.nan_mismatches == 0
        assert report.max_ulp <= op.ulp_budget("fused")
        assert report.zero_ulp_rate >= _EXACT_RATES.get(name, 0.0)

    @staticmethod
    def test_budgets():
        budgets = {name: fidelity.get_operator(name).ulp_budget("fused") for name in _FUSED_SAMPLES}
        assert budgets == {
            "exp": 4,
            "sigmoid": 8,
            "silu": 11,
            "gelu": 11,
            "sin": 4,
            "cos": 4,
            "softmax": 6,
            "rmsnorm": 1,
            "linear": 4,
        }


@pytest.mark.unit
class TestScaledErrorReport:
    @staticmethod
    def test_cancellation():
        # 1e-3 ULP of the result but a small fraction of the ULP of the summed magnitudes
        got, want = f32(1e-3), f32(np.float32(1e-3) + np.float32(2.0**-30))
        assert fidelity.compare_tensors(got, want, FP32).max_ulp > 1
        report = fidelity.scaled_error_report(got, want, np.array([1.0]))
        assert report.max_ulp == 1
        assert report.zero_ulp_rate == 0.0

    @staticmethod
    def test_large_results_use_their_own_ulp():
        got = f32(1024.0)
        want = got.copy() + 2
        report = fidelity.scaled_error_report(got, want, np.array([1.0]))
        assert report.max_ulp == 2
        assert report.max_abs_err == pytest.approx(2 * 2.0**-13)

    @staticmethod
    def test_identical_and_nan():
        nan = FP32.canonical_nan
        got = np.array([nan, 0x3F800000, nan], dtype=np.uint32)
        want = np.array([nan, 0x3F800000, 0x3F800000], dtype=np.uint32)
        report = fidelity.scaled_error_report(got, want, np.ones(3))
        assert report.nan_mismatches == 1
        assert report.max_ulp == fidelity.max_ulp(FP32)
        assert report.zero_ulp_rate == pytest.approx(2 / 3)

    @staticmethod
    def test_distances_per_element():
        got = f32([1.0, 1.0, 4.0])
        want = got.copy() + np.array([0, 3, 1], dtype=np.uint32)
        d = fidelity.scaled_ulp_distances(got, want, np.array([1.0, 4.0, 1.0]))
        # 3 ULPs of 1.0 are less than one ULP of 4.0
        assert d.tolist() == [0, 1, 1]

    @staticmethod
    def test_shape_mismatch():
        with pytest.raises(ValueError, match="shape mismatch"):
            fidelity.scaled_error_report(f32(1.0), f32(1.0), np.ones(2))


@pytest.mark.unit
class TestGradientCheck:
    @staticmethod
    @pytest.mark.parametrize("function", sorted(fidelity.GRADIENTS))
    def test_matches_finite_differences(function):
        x = np.linspace(-3.0, 3.0, 61, dtype=np.float32)
        report = fidelity.gradient_check(function, x)
        assert report["function"] == function
        assert report["max_rel_err"] < 1e-2
        assert report["backward"].sample_count == 61
        assert report["forward"].sample_count == 61

    @staticmethod
    def test_unknown_function():
        with pytest.raises(ValueError, match="no analytic gradient"):
            fidelity.gradient_check("gelu", normal_f32(4))


@pytest.mark.unit
class TestDepthScan:
    @staticmethod
    def test_oracle_engine():
        results = fidelity.depth_scan([1, 3, 2], seed=0, engine="oracle", batch=2)
        assert [r.depth for r in results] == [1, 2, 3]
        for r in results:
            assert r.ulp.sample_count == 2 * 4 * 8
            assert 0 <= r.sequence_max_ulp <= r.ulp.max_ulp

        table = fidelity.depth_table(results)
        assert table.columns.tolist() == [
            "depth",
            "max_ulp",
            "mean_ulp",
            "sequence_max_ulp",
            "zero_ulp_rate",
            "max_abs_err",
        ]
        assert len(table) == 3

    @staticmethod
    def test_same_order_is_exact():
        config = TransformerBlockConfig(d_model=4, n_heads=2, d_ff=4, seq_len=2)
        results = fidelity.depth_scan(
            [1], seed=1, config=config, engine="circuit", reference_order="ascending", batch=1
        )
        (report,) = results
        assert report.ulp.max_ulp == 0
        assert report.sequence_max_ulp == 0

    @staticmethod
    @pytest.mark.parametrize("seed", range(4))
    def test_error_grows_slowly_with_depth(seed):
        results = fidelity.depth_scan([1, 2, 4, 8], seed=seed, engine="oracle", batch=64)
        means = [r.ulp.mean_ulp for r in results]
        assert means == sorted(means)
        for prev, cur in zip(results, results[1:]):
            assert cur.sequence_max_ulp < 2 * prev.sequence_max_ulp

    @staticmethod
    def test_invalid_arguments():
        with pytest.raises(ValueError, match="positive integers"):
            fidelity.depth_scan([0], seed=0, engine="oracle")
        with pytest.raises(ValueError, match="unknown engine"):
            fidelity.depth_scan([1], seed=0, engine="gpu")
        with pytest.raises(ValueError, match="cannot be empty"):
            fidelity.depth_scan([1], seed=0, engine="oracle", weights=[])
        with pytest.raises(ValueError, match="batch must be"):
            fidelity.depth_scan([1], seed=0, engine="oracle", batch=0)


@pytest.mark.unit
class TestEncodingBenchmark:
    @staticmethod
    def test_spatial_is_lossless():
        row = fidelity.encoding_benchmark("spatial", steps=8, n=500, seed=0, trials=3)
        assert row["steps"] == 32
        assert row["mse_mean"] == 0.0
        assert row["mse_std"] == 0.0

    @staticmethod
    def test_truncation():
        full = fidelity.encoding_benchmark("spatial_truncated", steps=32, n=200, seed=0)
        assert full["mse_mean"] == 0.0
        coarse = fidelity.encoding_benchmark("spatial_truncated", steps=12, n=200, seed=0)
        assert coarse["mse_mean"] > 0.0

    @staticmethod
    def test_truncation_error_is_monotone():
        rows = [fidelity.encoding_benchmark("spatial_truncated", steps=k, n=2000, seed=3, trials=1) for k in range(33)]
        mse = [row["mse_mean"] for row in rows]
        assert all(a >= b for a, b in zip(mse, mse[1:]))
        assert all(a > b for a, b in zip(mse[12:], mse[13:]))
        assert mse[-1] == 0.0

    @staticmethod
    @pytest.mark.parametrize("steps", [16, 32])
    def test_bit_planes_beat_temporal_schemes(steps):
        planes = fidelity.encoding_benchmark("spatial_truncated", steps=steps, n=10_000, seed=0, trials=2)
        for scheme in ("rate", "ttfs"):
            row = fidelity.encoding_benchmark(scheme, steps=steps, n=10_000, seed=0, trials=2)
            assert row["mse_mean"] >= 1e3
            assert row["mse_mean"] >= 1e3 * planes["mse_mean"]

    @staticmethod
    @pytest.mark.parametrize("scheme", ["rate", "ttfs"])
    def test_temporal_schemes_improve_with_steps(scheme):
        few = fidelity.encoding_benchmark(scheme, steps=8, n=2000, seed=1)
        many = fidelity.encoding_benchmark(scheme, steps=1024, n=2000, seed=1)
        assert many["mse_mean"] < few["mse_mean"]

    @staticmethod
    def test_table():
        rows = [fidelity.encoding_benchmark(s, steps=16, n=10, seed=0, trials=2) for s in fidelity.ENCODING_SCHEMES]
        table = fidelity.encoding_table(rows)
        assert table["scheme"].tolist() == list(fidelity.ENCODING_SCHEMES)

    @staticmethod
    def test_invalid_arguments():
        with pytest.raises(ValueError, match="unknown encoding scheme"):
            fidelity.encoding_benchmark("phase", steps=8, n=10, seed=0)
        with pytest.raises(ValueError, match="n must be"):
            fidelity.encoding_benchmark("rate", steps=8, n=0, seed=0)
        with pytest.raises(ValueError, match="trials must be"):
            fidelity.encoding_benchmark("rate", steps=8, n=1, seed=0, trials=0)
        with pytest.raises(ValueError, match="channels"):
            fidelity.encoding_benchmark("spatial_truncated", steps=40, n=1, seed=0)
