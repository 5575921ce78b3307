# Copyright (C) 2025 spikefp contributors
#
# SPDX-License-Identifier: MIT

import numpy as np
import pytest
from test_helpers_patterns import f32, fp8_pairs, random_patterns, special_patterns

from spikefp.algorithms import fparith
from spikefp.algorithms.encoding import quantize
from spikefp.algorithms.fidelity import ulp_distances
from spikefp.algorithms.reference import host_floor, host_op
from spikefp.data_structures import BitPlaneTensor, GateNetlist, PrecisionFormat

FP8 = PrecisionFormat.FP8_E4M3
FP16 = PrecisionFormat.FP16
FP32 = PrecisionFormat.FP32

_BINARY = ("add", "sub", "mul", "div", "max")
_UNARY = ("sqrt", "reciprocal", "rsqrt")


def _circuit(op: str, fmt: PrecisionFormat, *patterns, **kwargs):
    tensors = [BitPlaneTensor.from_patterns(fmt, p) for p in patterns]
    return getattr(fparith, f"fp_{op}")(*tensors, **kwargs).patterns()


def _assert_bit_exact(op: str, fmt: PrecisionFormat, *patterns):
    got = _circuit(op, fmt, *patterns)
    want = host_op(op, fmt, *patterns)
    mismatches = np.flatnonzero(got != want)
    assert len(mismatches) == 0, (
        f"{op}: {len(mismatches)} mismatch(es), first operands "
        f"{[fmt.format_hex(p[mismatches[0]]) for p in patterns]}: "
        f"found {fmt.format_hex(got[mismatches[0]])}, expected {fmt.format_hex(want[mismatches[0]])}"
    )


def _special_pairs(fmt: PrecisionFormat):
    s = special_patterns(fmt)
    a, b = np.meshgrid(s, s, indexing="ij")
    return a.reshape(-1), b.reshape(-1)


def _operands(fmt: PrecisionFormat, arity: int, n: int):
    if arity == 1:
        return [np.concatenate([special_patterns(fmt), random_patterns(fmt, n, seed=1)])]
    sa, sb = _special_pairs(fmt)
    return [
        np.concatenate([sa, random_patterns(fmt, n, seed=2)]),
        np.concatenate([sb, random_patterns(fmt, n, seed=3)]),
    ]


@pytest.mark.unit
class TestFp8Exhaustive:
    @pytest.mark.parametrize("op", _BINARY)
    def test_binary(self, op):
        _assert_bit_exact(op, FP8, *fp8_pairs())

    @pytest.mark.parametrize("op", _UNARY)
    def test_unary(self, op):
        _assert_bit_exact(op, FP8, np.arange(256, dtype=np.uint8))


@pytest.mark.unit
class TestRandomOperands:
    @pytest.mark.parametrize("fmt", (FP16, FP32), ids=("fp16", "fp32"))
    @pytest.mark.parametrize("op", _BINARY)
    def test_binary(self, op, fmt):
        _assert_bit_exact(op, fmt, *_operands(fmt, 2, 2048))

    @pytest.mark.parametrize("fmt", (FP16, FP32), ids=("fp16", "fp32"))
    @pytest.mark.parametrize("op", _UNARY)
    def test_unary(self, op, fmt):
        _assert_bit_exact(op, fmt, *_operands(fmt, 1, 2048))

    def test_normal_values(self):
        rng = np.random.default_rng(0)
        a = f32(*rng.normal(0, 10, size=1024))
        b = f32(*rng.normal(0, 10, size=1024))
        for op in ("add", "mul", "div"):
            _assert_bit_exact(op, FP32, a, b)
        _assert_bit_exact("sqrt", FP32, f32(*np.abs(rng.normal(0, 10, size=1024))))


@pytest.mark.unit
class TestSpecialCases:
    def test_well_known_results(self):
        assert _circuit("add", FP32, f32(1.0), f32(1.0)).tolist() == f32(2.0).tolist()
        assert _circuit("add", FP32, f32(0.1), f32(0.2)).tolist() == f32(np.float32(0.1) + np.float32(0.2)).tolist()
        assert _circuit("sub", FP32, f32(1.0), f32(1.0)).tolist() == [0x00000000]
        assert _circuit("add", FP32, f32(-0.0), f32(-0.0)).tolist() == [0x80000000]
        assert _circuit("sqrt", FP32, f32(-0.0)).tolist() == [0x80000000]
        assert _circuit("sqrt", FP32, f32(4.0)).tolist() == f32(2.0).tolist()

    def test_invalid_operations(self):
        nan = FP32.canonical_nan
        assert _circuit("sub", FP32, f32(np.inf), f32(np.inf)).tolist() == [nan]
        assert _circuit("mul", FP32, f32(0.0), f32(np.inf)).tolist() == [nan]
        assert _circuit("div", FP32, f32(0.0), f32(0.0)).tolist() == [nan]
        assert _circuit("sqrt", FP32, f32(-1.0)).tolist() == [nan]
        assert _circuit("max", FP32, f32(1.0), np.array([0x7F800001], dtype=np.uint32)).tolist() == [nan]

    def test_division_by_zero(self):
        assert _circuit("div", FP32, f32(1.0), f32(0.0)).tolist() == [FP32.positive_inf]
        assert _circuit("div", FP32, f32(-1.0), f32(0.0)).tolist() == [FP32.positive_inf | FP32.sign_mask]
        assert _circuit("reciprocal", FP32, f32(-0.0)).tolist() == [FP32.positive_inf | FP32.sign_mask]

    def test_overflow(self):
        big = f32(3e38)
        assert _circuit("add", FP32, big, big).tolist() == [FP32.positive_inf]
        assert _circuit("mul", FP8, quantize([128.0], FP8), quantize([2.0], FP8)).tolist() == [FP8.positive_inf]


@pytest.mark.unit
class TestDivisionCorrection:
    def test_uncorrected_within_one_ulp(self):
        a, b = _operands(FP32, 2, 2048)
        for op, operands in (("div", (a, b)), ("reciprocal", (b,)), ("sqrt", (a,)), ("rsqrt", (a,))):
            got = _circuit(op, FP32, *operands, div_correction=False)
            assert ulp_distances(got, host_op(op, FP32, *operands), FP32).max() <= 1, op

    def test_fewer_neurons(self):
        counts = []
        for correction in (True, False):
            c = GateNetlist()
            x = BitPlaneTensor.from_patterns(FP32, f32(3.0))
            fparith.fp_div(x, x, netlist=c, div_correction=correction)
            counts.append(c.neuron_count)
        assert counts[0] > counts[1]


@pytest.mark.unit
class TestCompare:
    def test_relations(self):
        a = f32(1.0, -0.0, 2.0, np.nan, -np.inf, 5.0)
        b = f32(2.0, 0.0, 1.0, 1.0, 3.0, 5.0)
        res = fparith.fp_compare(BitPlaneTensor.from_patterns(FP32, a), BitPlaneTensor.from_patterns(FP32, b))
        assert res["lt"].tolist() == [True, False, False, False, True, False]
        assert res["eq"].tolist() == [False, True, False, False, False, True]
        assert res["unordered"].tolist() == [False, False, False, True, False, False]


@pytest.mark.unit
class TestIntegerConversion:
    def test_floor(self):
        x = f32(-2.5, -1.0, -0.5, -0.0, 0.0, 0.5, 1.5, 100.75, -1000.25)
        got = fparith.fp_to_int(BitPlaneTensor.from_patterns(FP32, x), 16)
        assert got.tolist() == [-3, -1, -1, 0, 0, 0, 1, 100, -1001]
        assert got.tolist() == host_floor(x, FP32).tolist()

    def test_from_int(self):
        values = [-32768, -3, -1, 0, 1, 7, 17, 1000, 32767]
        for fmt in (FP8, FP16, FP32):
            got = fparith.int_to_fp(values, 16, fmt).patterns()
            assert got.tolist() == quantize(values, fmt).tolist(), fmt.name


@pytest.mark.unit
class TestFpUnit:
    def test_unsupported_format(self):
        with pytest.raises(ValueError, match="not available for FP64"):
            fparith.FpUnit(GateNetlist(), PrecisionFormat.FP64)

    def test_operand_checks(self):
        a = BitPlaneTensor.from_patterns(FP16, np.zeros(2, dtype=np.uint16))
        b = BitPlaneTensor.from_patterns(FP32, np.zeros(2, dtype=np.uint32))
        with pytest.raises(ValueError, match="format mismatch"):
            fparith.fp_add(a, b)
        with pytest.raises(ValueError, match="element count mismatch"):
            fparith.fp_mul(a, BitPlaneTensor.from_patterns(FP16, np.zeros(3, dtype=np.uint16)))

    def test_shape_is_preserved(self):
        x = BitPlaneTensor.from_patterns(FP16, random_patterns(FP16, 6).reshape(2, 3))
        assert fparith.fp_add(x, x).shape == (2, 3)

    def test_neg(self):
        c = GateNetlist(lanes=4)
        unit = fparith.FpUnit(c, FP16)
        x = random_patterns(FP16, 4)
        got = unit.neg(c.input_word(x, 16)).to_uint()
        assert got.tolist() == host_op("neg", FP16, x).tolist()


def _triples(fmt: PrecisionFormat, n: int):
    sa, sb = _special_pairs(fmt)
    sc = np.resize(special_patterns(fmt), len(sa))
    return [np.concatenate([s, random_patterns(fmt, n, seed=seed)]) for s, seed in ((sa, 4), (sb, 5), (sc, 6))]


@pytest.mark.unit
class TestSingleRounding:
    def test_rsqrt_well_known_results(self):
        assert _circuit("rsqrt", FP32, f32(4.0)).tolist() == f32(0.5).tolist()
        assert _circuit("rsqrt", FP32, f32(1.0)).tolist() == f32(1.0).tolist()
        assert _circuit("rsqrt", FP32, f32(0.25)).tolist() == f32(2.0).tolist()
        assert _circuit("rsqrt", FP32, f32(2.0 ** -126)).tolist() == f32(2.0**63).tolist()

    def test_rsqrt_special_values(self):
        assert _circuit("rsqrt", FP32, f32(0.0)).tolist() == [FP32.positive_inf]
        assert _circuit("rsqrt", FP32, f32(-0.0)).tolist() == [FP32.positive_inf | FP32.sign_mask]
        assert _circuit("rsqrt", FP32, f32(np.inf)).tolist() == [0x00000000]
        assert _circuit("rsqrt", FP32, f32(-1.0)).tolist() == [FP32.canonical_nan]
        assert _circuit("rsqrt", FP32, f32(-np.inf)).tolist() == [FP32.canonical_nan]

    def test_rsqrt_normal_values(self):
        rng = np.random.default_rng(7)
        _assert_bit_exact("rsqrt", FP32, f32(*np.abs(rng.normal(0, 10, size=1024))))

    @pytest.mark.parametrize("fmt", (FP8, FP16, FP32), ids=("fp8", "fp16", "fp32"))
    def test_mul3(self, fmt):
        _assert_bit_exact("mul3", fmt, *_triples(fmt, 2048))

    def test_mul3_special_values(self):
        nan = FP32.canonical_nan
        assert _circuit("mul3", FP32, f32(2.0), f32(3.0), f32(-0.5)).tolist() == f32(-3.0).tolist()
        assert _circuit("mul3", FP32, f32(0.0), f32(np.inf), f32(1.0)).tolist() == [nan]
        assert _circuit("mul3", FP32, f32(-0.0), f32(2.0), f32(-1.0)).tolist() == [0x00000000]
        # the intermediate a * b overflows but the rounded triple product does not
        big = _circuit("mul3", FP32, f32(1e30), f32(1e30), f32(1e-30))
        assert big.tolist() == host_op("mul3", FP32, f32(1e30), f32(1e30), f32(1e-30)).tolist()
        assert big.tolist() != [FP32.positive_inf]

    def test_mul3_rounds_once(self):
        rng = np.random.default_rng(8)
        a, b, s = (f32(*rng.normal(0, 1, size=4096)) for _ in range(3))
        got = _circuit("mul3", FP32, a, b, s)
        twice = host_op("mul", FP32, host_op("mul", FP32, a, b), s)
        assert (got == host_op("mul3", FP32, a, b, s)).all()
        assert (got != twice).any()
