# Copyright (C) 2025 spikefp contributors
#
# SPDX-License-Identifier: MIT

import dataclasses
import time
import zlib
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import numpy.typing as npt
import pandas as pd
import structlog

from spikefp.algorithms import fparith, layers, nonlinear, reference
from spikefp.algorithms.encoding import (
    decode,
    encode,
    patterns_to_float,
    rate_roundtrip,
    sample_benchmark_inputs,
    truncate_patterns,
    ttfs_roundtrip,
)
from spikefp.data_structures import (
    BitPlaneTensor,
    BlockWeights,
    DepthReport,
    LinearWeights,
    PrecisionFormat,
    TransformerBlockConfig,
    UlpReport,
)
from spikefp.utils import derive_rng, pretty_format_elapsed_time

_FP32 = PrecisionFormat.FP32


def _patterns(x: BitPlaneTensor | npt.ArrayLike, fmt: PrecisionFormat) -> npt.NDArray[np.int64]:
    if isinstance(x, BitPlaneTensor):
        x = x.patterns()
    return np.asarray(x).astype(np.int64).reshape(-1)


def _is_nan(p: npt.NDArray[np.int64], fmt: PrecisionFormat) -> npt.NDArray[np.bool_]:
    return ((p & fmt.exponent_mask) == fmt.exponent_mask) & ((p & fmt.mantissa_mask) != 0)


def ordered_index(patterns: npt.ArrayLike, fmt: PrecisionFormat = _FP32) -> npt.NDArray[np.int64]:
    """
    Map bit patterns to integers preserving the order of the values they encode.
    +0 and -0 both map to 0 and consecutive representable values map to consecutive integers.
    """
    p = np.asarray(patterns).astype(np.int64)
    mag = p & (fmt.sign_mask - 1)
    return np.where(p & fmt.sign_mask, -mag, mag)


def max_ulp(fmt: PrecisionFormat = _FP32) -> int:
    """
    The distance between -Inf and +Inf.
    """
    return 2 * fmt.positive_inf


def ulp_distance(a: int, b: int, fmt: PrecisionFormat = _FP32) -> int:
    """
    Number of representable steps between two non-NaN bit patterns.
    """
    p = np.array([a, b], dtype=np.int64)
    if _is_nan(p, fmt).any():
        raise ValueError("ULP distance is undefined for NaN operands")
    ia, ib = ordered_index(p, fmt)
    return int(abs(int(ia) - int(ib)))


def ulp_distances(got: npt.ArrayLike, want: npt.ArrayLike, fmt: PrecisionFormat = _FP32) -> npt.NDArray[np.int64]:
    """
    Element-wise ULP distances. NaN matches any NaN, while NaN against a number is assigned max_ulp(fmt).
    """
    g, w = _patterns(got, fmt), _patterns(want, fmt)
    if g.shape != w.shape:
        raise ValueError(f"shape mismatch: {g.shape} != {w.shape}")
    gn, wn = _is_nan(g, fmt), _is_nan(w, fmt)
    d = np.abs(ordered_index(g, fmt) - ordered_index(w, fmt))
    d = np.where(gn & wn, 0, d)
    return np.where(gn ^ wn, max_ulp(fmt), d)


def compare_tensors(
    got: BitPlaneTensor | npt.ArrayLike, want: BitPlaneTensor | npt.ArrayLike, fmt: Optional[PrecisionFormat] = None
) -> UlpReport:
    """
    Aggregate the ULP distance and the absolute error between two batches of values.

    Parameters
    ----------
    got
        the values under test (a tensor or an array of bit patterns)
    want
        the reference values
    fmt
        the precision format. Required when passing bit patterns rather than tensors.

    Returns
    -------
    UlpReport
        the aggregated statistics
    """
    if fmt is None:
        if not isinstance(got, BitPlaneTensor):
            raise TypeError("fmt is required when comparing raw bit patterns")
        fmt = got.format
    for t in (got, want):
        if isinstance(t, BitPlaneTensor) and t.format != fmt:
            raise ValueError(f"format mismatch: {t.format.name} != {fmt.name}")
    if isinstance(got, BitPlaneTensor) and isinstance(want, BitPlaneTensor) and got.shape != want.shape:
        raise ValueError(f"shape mismatch: {got.shape} != {want.shape}")

    g, w = _patterns(got, fmt), _patterns(want, fmt)
    d = ulp_distances(g, w, fmt)
    n = len(d)
    if n == 0:
        return UlpReport(0, 0.0, 1.0, 0.0, 0)

    gn, wn = _is_nan(g, fmt), _is_nan(w, fmt)
    with np.errstate(invalid="ignore", over="ignore"):
        gv = patterns_to_float(g, fmt).astype(np.float64)
        wv = patterns_to_float(w, fmt).astype(np.float64)
        err = np.where((g == w) | gn | wn, 0.0, np.abs(gv - wv))

    total = sum(int(v) for v in d)
    zeros = int(np.count_nonzero(d == 0))
    return UlpReport(
        max_ulp=int(d.max()),
        mean_ulp=total / n,
        zero_ulp_rate=zeros / n,
        max_abs_err=float(err.max()),
        sample_count=n,
        nan_mismatches=int(np.count_nonzero(gn ^ wn)),
    )


def scaled_ulp_distances(got: npt.ArrayLike, want: npt.ArrayLike, scale: npt.ArrayLike) -> npt.NDArray[np.int64]:
    """
    Element-wise FP32 errors in units in the last place of max(|want|, scale), rounded up.

    Sums of terms with mixed signs lose their leading bits to cancellation, so the ULP of the
    result says little about the accuracy of the accumulation. Measuring against the magnitude of
    the terms gives an order-independent bound. Non-finite values fall back to ulp_distances.
    """
    g, w = _patterns(got, _FP32), _patterns(want, _FP32)
    scale = np.asarray(scale, dtype=np.float64).reshape(-1)
    if g.shape != w.shape or g.shape != scale.shape:
        raise ValueError(f"shape mismatch: {g.shape}, {w.shape} and {scale.shape}")

    gv = patterns_to_float(g, _FP32).astype(np.float64)
    wv = patterns_to_float(w, _FP32).astype(np.float64)
    finite = np.isfinite(gv) & np.isfinite(wv)
    with np.errstate(invalid="ignore", over="ignore"):
        unit = np.spacing(np.maximum(np.abs(wv), scale).astype(np.float32)).astype(np.float64)
        scaled = np.ceil(np.where(finite, np.abs(gv - wv) / unit, 0.0)).astype(np.int64)
    return np.where(g == w, 0, np.where(finite, scaled, ulp_distances(g, w, _FP32)))


def scaled_error_report(got: npt.ArrayLike, want: npt.ArrayLike, scale: npt.ArrayLike) -> UlpReport:
    """
    Aggregate scaled_ulp_distances like compare_tensors does for plain ULP distances.
    """
    d = scaled_ulp_distances(got, want, scale)
    if len(d) == 0:
        return UlpReport(0, 0.0, 1.0, 0.0, 0)

    g, w = _patterns(got, _FP32), _patterns(want, _FP32)
    gv = patterns_to_float(g, _FP32).astype(np.float64)
    wv = patterns_to_float(w, _FP32).astype(np.float64)
    with np.errstate(invalid="ignore", over="ignore"):
        err = np.where(np.isfinite(gv) & np.isfinite(wv) & (g != w), np.abs(gv - wv), 0.0)

    gn, wn = _is_nan(g, _FP32), _is_nan(w, _FP32)
    return UlpReport(
        max_ulp=int(d.max()),
        mean_ulp=float(d.mean()),
        zero_ulp_rate=float(np.count_nonzero(d == 0)) / len(d),
        max_abs_err=float(err.max()),
        sample_count=len(d),
        nan_mismatches=int(np.count_nonzero(gn ^ wn)),
    )


@dataclasses.dataclass(frozen=True)
class Operator:
    """
    An operation that can be verified against host references.

    sampler(rng, n, fmt) returns the operands (bit pattern arrays with n rows) and a parameter dictionary.
    circuit(tensors, params, div_correction) evaluates the spiking circuit.
    composition(patterns, fmt, params) and fused(patterns, fmt, params) return reference bit patterns.
    error_scale(patterns, params), when given, returns the magnitude each output error is measured
    against in the fused comparison (see scaled_error_report).
    """

    name: str
    formats: Tuple[PrecisionFormat, ...]
    sampler: Callable[[np.random.Generator, int, PrecisionFormat], Tuple[List[npt.NDArray], Dict[str, Any]]]
    circuit: Callable[[List[BitPlaneTensor], Dict[str, Any], bool], BitPlaneTensor]
    composition: Callable[[List[npt.NDArray], PrecisionFormat, Dict[str, Any]], npt.NDArray]
    fused: Callable[[List[npt.NDArray], PrecisionFormat, Dict[str, Any]], npt.NDArray]
    budget: int = 0
    fused_budget: Optional[int] = None
    divides: bool = False
    chunk: int = 8192
    error_scale: Optional[Callable[[List[npt.NDArray], Dict[str, Any]], npt.NDArray[np.float64]]] = None

    def reference(self, name: str):
        if name == "composition":
            return self.composition
        if name in {"libm", "fused"}:
            return self.fused
        raise ValueError(f'unknown reference "{name}"')

    def ulp_budget(self, reference_name: str, div_correction: bool = True) -> Optional[int]:
        if reference_name == "composition":
            return self.budget if div_correction or not self.divides else max(self.budget, 1)
        return self.fused_budget


def _random_patterns(rng: np.random.Generator, n: int, fmt: PrecisionFormat, arity: int):
    return [rng.integers(0, 1 << fmt.bit_width, size=n, dtype=np.uint64).astype(fmt.uint_dtype) for _ in range(arity)], {}


def _uniform(lo: float, hi: float):
    def sampler(rng: np.random.Generator, n: int, fmt: PrecisionFormat):
        return [reference.f32_patterns(rng.uniform(lo, hi, size=n).astype(np.float32))], {}

    return sampler


def _normal_rows(cols: int, scale: float, extra: Optional[Callable] = None):
    def sampler(rng: np.random.Generator, n: int, fmt: PrecisionFormat):
        x = rng.normal(0.0, scale, size=(n, cols)).astype(np.float32)
        params = {} if extra is None else extra(rng)
        return [reference.f32_patterns(x)], params

    return sampler


def _arith(name: str, arity: int) -> Operator:
    fn = getattr(fparith, f"fp_{name}")
    takes_correction = name in {"div", "sqrt", "reciprocal", "rsqrt"}

    def circuit(ts, params, div_correction):
        if takes_correction:
            return fn(*ts, div_correction=div_correction)
        return fn(*ts)

    def ref(ps, fmt, params):
        return reference.host_op(name, fmt, *ps)

    return Operator(
        name=f"fp_{name}",
        formats=fparith.ARITHMETIC_FORMATS,
        sampler=lambda rng, n, fmt: _random_patterns(rng, n, fmt, arity),
        circuit=circuit,
        composition=ref,
        fused=ref,
        budget=0,
        fused_budget=0,
        divides=takes_correction,
    )


def _f32_unary(host: Callable, fused: Callable):
    def composition(ps, fmt, params):
        return reference.f32_patterns(host(reference.f32_values(ps[0])))

    def libm(ps, fmt, params):
        return reference.f32_patterns(fused(reference.f32_values(ps[0])))

    return composition, libm


def _unary(name: str, circuit_fn, host, fused, sampler, fused_budget: Optional[int]) -> Operator:
    composition, libm = _f32_unary(host, fused)
    return Operator(
        name=name,
        formats=(_FP32,),
        sampler=sampler,
        circuit=lambda ts, params, corr: circuit_fn(ts[0]),
        composition=composition,
        fused=libm,
        fused_budget=fused_budget,
    )


_RMSNORM_DIM = 16
_SOFTMAX_DIM = 8
_LINEAR_DIM = 64


def _rmsnorm_params(rng: np.random.Generator) -> Dict[str, Any]:
    return {"gamma": (1.0 + 0.1 * rng.standard_normal(_RMSNORM_DIM)).astype(np.float32), "eps": np.float32(1e-6)}


def _linear_params(rng: np.random.Generator) -> Dict[str, Any]:
    return {"weights": LinearWeights.random(_LINEAR_DIM, _LINEAR_DIM, rng, bias=True)}


def _linear_error_scale(ps: List[npt.NDArray], params: Dict[str, Any]) -> npt.NDArray[np.float64]:
    weights = params["weights"]
    x = np.abs(reference.f32_values(ps[0]).astype(np.float64))
    scale = x @ np.abs(weights.w.astype(np.float64)).T
    if weights.b is not None:
        scale = scale + np.abs(weights.b.astype(np.float64))
    return scale


def _build_registry() -> Dict[str, Operator]:
    ops = [
        _arith("add", 2),
        _arith("sub", 2),
        _arith("mul", 2),
        _arith("div", 2),
        _arith("sqrt", 1),
        _arith("reciprocal", 1),
        _arith("rsqrt", 1),
        _arith("mul3", 3),
        _arith("max", 2),
        _unary("exp", nonlinear.fp_exp, reference.host_exp, reference.libm_exp, _uniform(-87.0, 88.0), 4),
        _unary("sigmoid", nonlinear.fp_sigmoid, reference.host_sigmoid, reference.libm_sigmoid, _uniform(-20.0, 20.0), 8),
        # tanh = 2 sigmoid(2x) - 1 cancels near 0: no bound against the fused function
        _unary("tanh", nonlinear.fp_tanh, reference.host_tanh, reference.libm_tanh, _uniform(-10.0, 10.0), None),
        _unary("silu", nonlinear.fp_silu, reference.host_silu, reference.libm_silu, _uniform(-20.0, 20.0), 11),
        _unary("gelu", nonlinear.fp_gelu, reference.host_gelu, reference.libm_gelu, _uniform(-10.0, 10.0), 11),
        _unary(
            "sin",
            lambda t: nonlinear.fp_sincos(t)[0],
            lambda x: reference.host_sincos(x)[0],
            reference.libm_sin,
            _uniform(-100.0, 100.0),
            4,
        ),
        _unary(
            "cos",
            lambda t: nonlinear.fp_sincos(t)[1],
            lambda x: reference.host_sincos(x)[1],
            reference.libm_cos,
            _uniform(-100.0, 100.0),
            4,
        ),
        Operator(
            name="softmax",
            formats=(_FP32,),
            sampler=_normal_rows(_SOFTMAX_DIM, 1.0),
            circuit=lambda ts, params, corr: nonlinear.fp_softmax(ts[0]),
            composition=lambda ps, fmt, params: reference.f32_patterns(reference.host_softmax(reference.f32_values(ps[0]))),
            fused=lambda ps, fmt, params: reference.f32_patterns(reference.fused_softmax(reference.f32_values(ps[0]))),
            fused_budget=6,
            chunk=1024,
        ),
        Operator(
            name="rmsnorm",
            formats=(_FP32,),
            sampler=_normal_rows(_RMSNORM_DIM, 1.0, _rmsnorm_params),
            circuit=lambda ts, params, corr: layers.rmsnorm_forward(ts[0], params["gamma"], params["eps"]),
            composition=lambda ps, fmt, params: reference.f32_patterns(
                reference.host_rmsnorm(reference.f32_values(ps[0]), params["gamma"], params["eps"])
            ),
            fused=lambda ps, fmt, params: reference.f32_patterns(
                reference.fused_rmsnorm(reference.f32_values(ps[0]), params["gamma"], params["eps"])
            ),
            fused_budget=1,
            chunk=512,
        ),
        Operator(
            name="linear",
            formats=(_FP32,),
            sampler=_normal_rows(_LINEAR_DIM, 1.0, _linear_params),
            circuit=lambda ts, params, corr: layers.linear_forward(ts[0], params["weights"]),
            composition=lambda ps, fmt, params: reference.f32_patterns(
                reference.host_linear(reference.f32_values(ps[0]), params["weights"])
            ),
            # accumulation in the opposite order
            fused=lambda ps, fmt, params: reference.f32_patterns(
                reference.host_linear(reference.f32_values(ps[0]), params["weights"], order="reversed")
            ),
            fused_budget=4,
            chunk=16,
            error_scale=_linear_error_scale,
        ),
    ]
    return {op.name: op for op in ops}


OPERATORS: Dict[str, Operator] = _build_registry()


def get_operator(name: str) -> Operator:
    try:
        return OPERATORS[name]
    except KeyError:
        raise ValueError(f'unknown operator "{name}": choose one of {", ".join(OPERATORS)}') from None


def evaluate_operator(
    op: Operator,
    samples: int,
    seed: int,
    fmt: PrecisionFormat = _FP32,
    reference_name: str = "composition",
    div_correction: bool = True,
    progress: Optional[Callable[[int], None]] = None,
) -> UlpReport:
    """
    Run an operator on seeded random inputs and compare the circuit outputs with a host reference.

    Parameters
    ----------
    op
        the operator to verify
    samples
        the number of samples (elements for element-wise operators, rows for row-wise operators)
    seed
        the seed used to draw the inputs
    fmt
        the precision format
    reference_name
        "composition" (same sequence of operations on the host) or "libm" (fused host evaluation)
    div_correction
        whether division and square root circuits apply the final correction step
    progress
        optional callback invoked with the number of samples processed after each chunk

    Returns
    -------
    UlpReport
        the comparison report
    """
    if samples < 1:
        raise ValueError("samples must be a positive integer")
    if fmt not in op.formats:
        raise ValueError(f"{op.name} does not support {fmt.name}")
    ref = op.reference(reference_name)
    rng = derive_rng(seed, zlib.crc32(op.name.encode()))
    operands, params = op.sampler(rng, samples, fmt)

    got, want, scale = [], [], []
    for start in range(0, samples, op.chunk):
        chunk = [p[start : start + op.chunk] for p in operands]
        tensors = [BitPlaneTensor.from_patterns(fmt, p) for p in chunk]
        got.append(op.circuit(tensors, params, div_correction).patterns().reshape(-1))
        want.append(np.asarray(ref(chunk, fmt, params)).reshape(-1))
        if op.error_scale is not None:
            scale.append(np.asarray(op.error_scale(chunk, params)).reshape(-1))
        if progress is not None:
            progress(len(chunk[0]))

    if reference_name != "composition" and op.error_scale is not None:
        return scaled_error_report(np.concatenate(got), np.concatenate(want), np.concatenate(scale))
    return compare_tensors(np.concatenate(got), np.concatenate(want), fmt)


def _ulp_report_f64(got: npt.NDArray[np.float32], want64: npt.NDArray[np.float64]) -> UlpReport:
    want = reference.f32_patterns(want64.astype(np.float32))
    return compare_tensors(reference.f32_patterns(got), want, _FP32)


def _sigmoid64(x):
    return 1.0 / (1.0 + np.exp(-x))


def _tanh_grad(x):
    t = reference.host_tanh(x)
    return np.float32(1.0) - t * t


def _sigmoid_grad(x):
    s = reference.host_sigmoid(x)
    return s * (np.float32(1.0) - s)


def _silu_grad(x):
    s = reference.host_sigmoid(x)
    return s * (np.float32(1.0) + x * (np.float32(1.0) - s))


# forward, FP32 analytic derivative, float64 analytic derivative and fused forward
GRADIENTS: Dict[str, Tuple[Callable, Callable, Callable, Callable]] = {
    "exp": (reference.host_exp, reference.host_exp, np.exp, reference.libm_exp),
    "sigmoid": (
        reference.host_sigmoid,
        _sigmoid_grad,
        lambda x: _sigmoid64(x) * (1.0 - _sigmoid64(x)),
        reference.libm_sigmoid,
    ),
    "tanh": (reference.host_tanh, _tanh_grad, lambda x: 1.0 - np.tanh(x) ** 2, reference.libm_tanh),
    "silu": (
        reference.host_silu,
        _silu_grad,
        lambda x: _sigmoid64(x) * (1.0 + x * (1.0 - _sigmoid64(x))),
        reference.libm_silu,
    ),
}


def gradient_check(function: str, x: npt.ArrayLike, step: float = 1e-3) -> Dict[str, Any]:
    """
    Check the backward pass of a FP32 function.

    The analytic derivative, evaluated with the same FP32 primitives as the forward pass,
    is compared with central finite differences of the forward pass and with the float64 derivative.

    Returns
    -------
    Dict[str, Any]
        the largest relative deviation from finite differences ("max_rel_err") and the
        forward and backward ULP reports against float64 evaluations
    """
    try:
        forward, grad, grad64, fused = GRADIENTS[function]
    except KeyError:
        raise ValueError(f'no analytic gradient for "{function}": choose one of {", ".join(GRADIENTS)}') from None
    x = np.asarray(x, dtype=np.float32).reshape(-1)
    x64 = x.astype(np.float64)

    with np.errstate(all="ignore"):
        lo = (x64 - step * np.maximum(1.0, np.abs(x64))).astype(np.float32)
        hi = (x64 + step * np.maximum(1.0, np.abs(x64))).astype(np.float32)
        numeric = (forward(hi).astype(np.float64) - forward(lo).astype(np.float64)) / (
            hi.astype(np.float64) - lo.astype(np.float64)
        )
        analytic = grad(x)
        rel = np.abs(analytic.astype(np.float64) - numeric) / np.maximum(np.abs(numeric), 1e-12)

    report = {
        "function": function,
        "max_rel_err": float(rel.max(initial=0.0)),
        "backward": _ulp_report_f64(analytic, grad64(x64)),
    }
    report["forward"] = compare_tensors(reference.f32_patterns(forward(x)), reference.f32_patterns(fused(x)), _FP32)
    return report


DEFAULT_DEPTH_CONFIG = TransformerBlockConfig(d_model=8, n_heads=2, d_ff=32, seq_len=4)


def _stack(
    x: npt.NDArray[np.float32],
    blocks: Sequence[BlockWeights],
    config: TransformerBlockConfig,
    engine: str,
    order: str,
) -> List[npt.NDArray[np.float32]]:
    outputs = []
    for w in blocks:
        if engine == "circuit":
            t = layers.transformer_block_forward(encode(x, _FP32), w, config, order=order)
            x = decode(t).astype(np.float32)
        else:
            x = reference.host_block(x, w, config, order)
        outputs.append(x)
    return outputs


def depth_scan(
    block_counts: Sequence[int],
    seed: int,
    config: TransformerBlockConfig = DEFAULT_DEPTH_CONFIG,
    engine: str = "circuit",
    reference_order: str = "reversed",
    weights: Optional[Sequence[BlockWeights]] = None,
    batch: int = 16,
) -> List[DepthReport]:
    """
    Stack seeded random transformer blocks and compare the output at each requested depth with
    a host reference accumulating in a different order.

    Errors are measured in ULPs of the root mean square of each output row (see
    scaled_ulp_distances), so that components close to zero do not dominate the report.

    Parameters
    ----------
    block_counts
        the depths at which outputs are compared
    seed
        the seed used to draw the inputs and the block weights
    config
        the block configuration
    engine
        "circuit" to evaluate the spiking circuits, "oracle" to use the same-order host reference
        (which is bit-identical to the circuits and much faster)
    reference_order
        the accumulation order of the reference stack
    weights
        the weights of each block. Seeded random weights are drawn when not provided, with the
        residual projections scaled by 1 / sqrt(2 * depth) to keep activations bounded.
        When fewer blocks than the requested depth are given, the sequence is repeated.
    batch
        the number of independent input sequences

    Returns
    -------
    List[DepthReport]
        one report per requested depth
    """
    if len(block_counts) == 0 or min(block_counts) < 1:
        raise ValueError("block counts must be positive integers")
    if engine not in {"circuit", "oracle"}:
        raise ValueError(f'unknown engine "{engine}"')
    if batch < 1:
        raise ValueError("batch must be a positive integer")

    logger = structlog.get_logger().bind(step="depth")
    rng = derive_rng(seed, 0)
    depth = max(block_counts)
    x = rng.normal(0.0, 1.0, size=(batch, config.seq_len, config.d_model)).astype(np.float32)
    if weights is None:
        residual_scale = 1.0 / np.sqrt(2.0 * depth)
        blocks = [BlockWeights.random(config, rng, residual_scale=residual_scale) for _ in range(depth)]
    else:
        if len(weights) == 0:
            raise ValueError("weights cannot be empty")
        for w in weights:
            w.check(config)
        blocks = [weights[i % len(weights)] for i in range(depth)]

    t0 = time.time()
    logger.info("evaluating %d transformer blocks on %d sequences with the %s engine", depth, batch, engine)
    got = [_stack(seq, blocks, config, engine, "ascending") for seq in x]
    want = [_stack(seq, blocks, config, "oracle", reference_order) for seq in x]
    logger.info("block evaluation took %s", pretty_format_elapsed_time(t0))

    results = []
    for d in sorted(set(block_counts)):
        g = np.stack([outputs[d - 1] for outputs in got])
        w = np.stack([outputs[d - 1] for outputs in want])
        with np.errstate(over="ignore", invalid="ignore"):
            rms = np.sqrt(np.mean(np.square(w.astype(np.float64)), axis=-1, keepdims=True))
        scale = np.broadcast_to(np.nan_to_num(rms, nan=0.0, posinf=0.0), w.shape)

        g_bits, w_bits = reference.f32_patterns(g.reshape(-1)), reference.f32_patterns(w.reshape(-1))
        distances = scaled_ulp_distances(g_bits, w_bits, scale.reshape(-1)).reshape(batch, -1)
        results.append(
            DepthReport(
                depth=d,
                ulp=scaled_error_report(g_bits, w_bits, scale.reshape(-1)),
                sequence_max_ulp=float(distances.max(axis=1).mean()),
            )
        )
    return results


def depth_table(results: Sequence[DepthReport]) -> pd.DataFrame:
    columns = ["depth", "max_ulp", "mean_ulp", "sequence_max_ulp", "zero_ulp_rate", "max_abs_err"]
    return pd.DataFrame(
        [
            {
                "depth": r.depth,
                "max_ulp": r.ulp.max_ulp,
                "mean_ulp": r.ulp.mean_ulp,
                "sequence_max_ulp": r.sequence_max_ulp,
                "zero_ulp_rate": r.ulp.zero_ulp_rate,
                "max_abs_err": r.ulp.max_abs_err,
            }
            for r in results
        ],
        columns=columns,
    )


ENCODING_SCHEMES = ("spatial", "spatial_truncated", "rate", "ttfs")


def _encoding_roundtrip(scheme: str, x: npt.NDArray[np.float32], steps: int, rng: np.random.Generator):
    if scheme == "spatial":
        return decode(encode(x, _FP32)).astype(np.float64)
    if scheme == "spatial_truncated":
        kept = truncate_patterns(x.view(np.uint32), _FP32, steps)
        return patterns_to_float(kept, _FP32).astype(np.float64)
    if scheme == "rate":
        return rate_roundtrip(x, steps, rng)
    if scheme == "ttfs":
        return ttfs_roundtrip(x, steps)
    raise ValueError(f'unknown encoding scheme "{scheme}": choose one of {", ".join(ENCODING_SCHEMES)}')


def encoding_benchmark(scheme: str, steps: int, n: int, seed: int, trials: int = 5) -> Dict[str, Any]:
    """
    Mean squared reconstruction error of an encoding scheme.

    Parameters
    ----------
    scheme
        one of spatial, spatial_truncated, rate and ttfs
    steps
        the number of time steps (rate, ttfs) or the number of kept channels (spatial_truncated).
        Ignored by the spatial scheme, which always uses the full FP32 width.
    n
        the number of values per trial
    seed
        the seed of the input and spike streams
    trials
        the number of independent trials

    Returns
    -------
    Dict[str, Any]
        a row of the encoding benchmark table
    """
    if n < 1:
        raise ValueError("n must be a positive integer")
    if trials < 1:
        raise ValueError("trials must be a positive integer")
    if scheme == "spatial":
        steps = _FP32.bit_width
    elif scheme == "spatial_truncated" and not 0 <= steps <= _FP32.bit_width:
        raise ValueError(f"spatial_truncated keeps between 0 and {_FP32.bit_width} channels")

    mse = []
    for trial in range(trials):
        rng = derive_rng(seed, trial)
        x = sample_benchmark_inputs(n, rng)
        y = _encoding_roundtrip(scheme, x, steps, rng)
        mse.append(float(np.mean((y - x.astype(np.float64)) ** 2)))

    return {
        "scheme": scheme,
        "steps": steps,
        "n": n,
        "mse_mean": float(np.mean(mse)),
        "mse_std": float(np.std(mse, ddof=1)) if trials > 1 else 0.0,
        "seed": seed,
    }


def encoding_table(rows: Sequence[Dict[str, Any]]) -> pd.DataFrame:
    return pd.DataFrame(list(rows), columns=["scheme", "steps", "n", "mse_mean", "mse_std", "seed"])

