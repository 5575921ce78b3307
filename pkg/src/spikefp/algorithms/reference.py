# Copyright (C) 2025 spikefp contributors
#
# SPDX-License-Identifier: MIT

"""
Host-side oracles.

The "host_*" functions perform the same sequence of IEEE-754 operations as the spiking circuits
using numpy scalar arithmetic, so they are expected to agree bit-for-bit with them.
The "libm_*" functions evaluate the mathematical function in float64 and round once.
The "fused_*" functions evaluate a layer the way a framework kernel does: FP32 statistics
followed by a correctly rounded normalization.
"""

import math
from typing import Callable, Dict, List, Sequence, Tuple

import numpy as np
import numpy.typing as npt

from spikefp.algorithms.encoding import patterns_to_float, quantize
from spikefp.algorithms.polynomials import (
    constant_f32,
    cos_polynomial,
    exp_polynomial,
    sin_polynomial,
)
from spikefp.data_structures import (
    BlockWeights,
    LinearWeights,
    PrecisionFormat,
    TransformerBlockConfig,
)

ORDERS = ("ascending", "reversed")

_F32 = np.float32
# extra bits carried by the integer square roots below the result precision
_ISQRT_GUARD_BITS = 64
# keeps the sign, the exponent and the 11 leading mantissa bits of a FP32 value
_SPLIT_MASK = 0xFFFFF000


def canonicalize(patterns: npt.ArrayLike, fmt: PrecisionFormat) -> npt.NDArray:
    """
    Replace every NaN pattern with the canonical quiet NaN of the format.
    """
    p = np.asarray(patterns).astype(fmt.uint_dtype)
    exp = (p.astype(np.uint64) >> np.uint64(fmt.mantissa_bits)) & np.uint64((1 << fmt.exponent_bits) - 1)
    man = p.astype(np.uint64) & np.uint64(fmt.mantissa_mask)
    nan = (exp == (1 << fmt.exponent_bits) - 1) & (man != 0)
    return np.where(nan, fmt.canonical_nan, p).astype(fmt.uint_dtype)


def f32_patterns(values: npt.ArrayLike) -> npt.NDArray[np.uint32]:
    return canonicalize(np.asarray(values, dtype=np.float32).view(np.uint32), PrecisionFormat.FP32)


def f32_values(patterns: npt.ArrayLike) -> npt.NDArray[np.float32]:
    return np.asarray(patterns).astype(np.uint32).view(np.float32)


def _round(values: npt.NDArray[np.float64], fmt: PrecisionFormat) -> npt.NDArray:
    return canonicalize(quantize(values, fmt), fmt)


def _max(a: npt.NDArray, b: npt.NDArray) -> npt.NDArray:
    with np.errstate(invalid="ignore"):
        return np.where(np.isnan(a) | np.isnan(b), np.nan, np.where(a < b, b, a)).astype(np.result_type(a, b))


def _decompose(v: float) -> Tuple[bool, int, int]:
    """
    Split a finite non-zero float into (negative, mantissa, exponent) with |v| = mantissa * 2^exponent.
    """
    f, e = math.frexp(abs(v))
    return v < 0, int(f * (1 << 53)), e - 53


def _round_exact(q: int, scale: int, inexact: bool, negative: bool, fmt: PrecisionFormat) -> float:
    """
    Round q * 2^scale to the format with round-to-nearest-even.

    inexact marks a non-zero tail below the last bit of q. The result is returned as a float64
    holding a value of the format (or an infinity on overflow).
    """
    lsb = max(q.bit_length() - (fmt.mantissa_bits + 1) + scale, 1 - fmt.bias - fmt.mantissa_bits)
    shift = lsb - scale
    if shift > 0:
        kept = q >> shift
        rem = q - (kept << shift)
        half = 1 << (shift - 1)
        if rem > half or (rem == half and (inexact or kept & 1)):
            kept += 1
    else:
        kept = q << -shift
    with np.errstate(over="ignore"):
        value = float(np.ldexp(np.float64(kept), lsb))
    return -value if negative else value


def _rsqrt_exact(v: float, fmt: PrecisionFormat) -> float:
    if math.isnan(v) or v < 0:
        return math.nan
    if v == 0:
        return math.copysign(math.inf, v)
    if math.isinf(v):
        return 0.0
    _, mant, e = _decompose(v)
    if e % 2:
        mant, e = mant << 1, e - 1
    p = _ISQRT_GUARD_BITS + mant.bit_length()
    q = math.isqrt((1 << (2 * p)) // mant)
    return _round_exact(q, -p - e // 2, q * q * mant != 1 << (2 * p), False, fmt)


def _mul3_exact(a: float, b: float, s: float, fmt: PrecisionFormat) -> float:
    if not (math.isfinite(a) and math.isfinite(b) and math.isfinite(s)) or a == 0 or b == 0 or s == 0:
        return a * b * s
    parts = [_decompose(v) for v in (a, b, s)]
    q = parts[0][1] * parts[1][1] * parts[2][1]
    negative = parts[0][0] ^ parts[1][0] ^ parts[2][0]
    return _round_exact(q, sum(p[2] for p in parts), False, negative, fmt)


def _scaled_rsqrt_exact(g: float, x: float, ms: float, fmt: PrecisionFormat) -> float:
    """
    g * x / sqrt(ms) rounded once.
    """
    if not (math.isfinite(g) and math.isfinite(x) and math.isfinite(ms)) or g == 0 or x == 0 or ms <= 0:
        with np.errstate(all="ignore"):
            return float(np.float64(g) * np.float64(x) / np.sqrt(np.float64(ms)))
    ng, mg, eg = _decompose(g)
    nx, mx, ex = _decompose(x)
    _, mm, em = _decompose(ms)
    if em % 2:
        mm, em = mm << 1, em - 1
    num = mg * mx
    p = _ISQRT_GUARD_BITS + mm.bit_length()
    q = math.isqrt(((num * num) << (2 * p)) // mm)
    inexact = q * q * mm != (num * num) << (2 * p)
    return _round_exact(q, eg + ex - em // 2 - p, inexact, ng ^ nx, fmt)


def _exact_op(fn: Callable[..., float], fmt: PrecisionFormat, *values: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
    return np.vectorize(lambda *v: fn(*v, fmt), otypes=[np.float64])(*values)


# Exact float64 evaluation followed by a single rounding is correctly rounded for all supported formats:
# float64 carries more than twice the significand bits of FP32 plus two.
_HOST_OPS: Dict[str, Callable[..., npt.NDArray[np.float64]]] = {
    "add": lambda a, b: a + b,
    "sub": lambda a, b: a - b,
    "mul": lambda a, b: a * b,
    "div": lambda a, b: a / b,
    "sqrt": np.sqrt,
    "reciprocal": lambda b: 1.0 / b,
    "max": _max,
}

# operations without an exact float64 evaluation are rounded from integer arithmetic
_EXACT_OPS: Dict[str, Callable[..., float]] = {
    "rsqrt": _rsqrt_exact,
    "mul3": _mul3_exact,
}


def host_op(op: str, fmt: PrecisionFormat, *operands: npt.ArrayLike) -> npt.NDArray:
    """
    Correctly rounded reference for an element-wise arithmetic operation.

    Parameters
    ----------
    op
        one of add, sub, mul, div, sqrt, reciprocal, rsqrt, mul3, max and neg
    fmt
        the precision format of the operands
    operands
        the operands as bit patterns

    Returns
    -------
    npt.NDArray
        the bit patterns of the results. NaN results are canonical.
    """
    if op == "neg":
        (p,) = operands
        return (np.asarray(p).astype(fmt.uint_dtype) ^ fmt.sign_mask).astype(fmt.uint_dtype)
    if op not in _HOST_OPS and op not in _EXACT_OPS:
        raise ValueError(f'unknown operation "{op}"')

    values = [patterns_to_float(p, fmt).astype(np.float64) for p in operands]
    with np.errstate(all="ignore"):
        if op in _EXACT_OPS:
            return _round(_exact_op(_EXACT_OPS[op], fmt, *values), fmt)
        return _round(_HOST_OPS[op](*values), fmt)


def host_floor(patterns: npt.ArrayLike, fmt: PrecisionFormat) -> npt.NDArray[np.int64]:
    return np.floor(patterns_to_float(patterns, fmt).astype(np.float64)).astype(np.int64)


def _nan_to_canonical(x: npt.NDArray[np.float32], nan: npt.NDArray[np.bool_]) -> npt.NDArray[np.float32]:
    out = np.array(x, dtype=_F32)
    out[nan] = f32_values(PrecisionFormat.FP32.canonical_nan)
    return out


def _horner(coefficients: npt.NDArray[np.float32], x: npt.NDArray[np.float32]) -> npt.NDArray[np.float32]:
    p = np.full_like(x, coefficients[0])
    for c in coefficients[1:]:
        p = p * x + c
    return p


def host_exp(x: npt.ArrayLike) -> npt.NDArray[np.float32]:
    x = np.asarray(x, dtype=_F32)
    poly = exp_polynomial()
    with np.errstate(all="ignore"):
        lo, hi = constant_f32("exp.clamp_lo"), constant_f32("exp.clamp_hi")
        xc = np.where(x < lo, lo, x).astype(_F32)
        xc = np.where(hi < xc, hi, xc).astype(_F32)
        t = xc * constant_f32("exp.inv_ln2") + constant_f32("exp.half")
        k = np.floor(np.nan_to_num(t)).astype(np.int64)
        kf = k.astype(_F32)
        r_hi = xc - kf * constant_f32("exp.ln2_hi")
        p = kf * constant_f32("exp.ln2_lo")
        r = r_hi - p
        r_lo = (r_hi - r) - p
        y = _horner(poly.values(), r) * (r * r)
        one = _F32(1.0)
        head = r + one
        err = (one - head) + r
        s = head + (err + (y + r_lo * head))
        out = np.ldexp(s.astype(np.float64), k).astype(_F32)
    return _nan_to_canonical(out, np.isnan(x))


def host_sigmoid(x: npt.ArrayLike) -> npt.NDArray[np.float32]:
    x = np.asarray(x, dtype=_F32)
    with np.errstate(all="ignore"):
        return _F32(1.0) / (host_exp(-x) + _F32(1.0))


def host_tanh(x: npt.ArrayLike) -> npt.NDArray[np.float32]:
    x = np.asarray(x, dtype=_F32)
    with np.errstate(all="ignore"):
        return host_sigmoid(x * _F32(2.0)) * _F32(2.0) - _F32(1.0)


def host_silu(x: npt.ArrayLike) -> npt.NDArray[np.float32]:
    x = np.asarray(x, dtype=_F32)
    with np.errstate(all="ignore"):
        return x * host_sigmoid(x)


def _gelu_argument(x: npt.NDArray[np.float32]) -> Tuple[npt.NDArray[np.float32], npt.NDArray[np.float32]]:
    """
    z = 1.702 x as an unevaluated sum z_hi + z_lo: the rounding error of x * alpha is recovered with
    a split product and the representation error of alpha is added back.
    """
    alpha, a1, a2 = constant_f32("gelu.alpha"), constant_f32("gelu.alpha_hi"), constant_f32("gelu.alpha_lo")
    z = x * alpha
    x1 = (x.view(np.uint32) & np.uint32(_SPLIT_MASK)).view(_F32)
    x2 = x - x1
    err = (((x1 * a1 - z) + x2 * a1) + x1 * a2) + x2 * a2
    return z, err + x * constant_f32("gelu.alpha_tail")


def host_gelu(x: npt.ArrayLike) -> npt.NDArray[np.float32]:
    x = np.asarray(x, dtype=_F32)
    one = _F32(1.0)
    with np.errstate(all="ignore"):
        z, z_lo = _gelu_argument(x)
        e = host_exp(-z)
        # e^(-z_hi - z_lo) ~ e^(-z_hi) * (1 - z_lo)
        e = np.where(np.abs(z) < constant_f32("gelu.clamp"), e - e * z_lo, e).astype(_F32)
        return x * (one / (e + one))


def _flip_sign(x: npt.NDArray[np.float32], flip: npt.NDArray[np.bool_]) -> npt.NDArray[np.float32]:
    p = x.view(np.uint32) ^ np.where(flip, np.uint32(0x80000000), np.uint32(0))
    return p.astype(np.uint32).view(_F32)


def host_sincos(x: npt.ArrayLike) -> Tuple[npt.NDArray[np.float32], npt.NDArray[np.float32]]:
    x = np.asarray(x, dtype=_F32)
    sp, cp = sin_polynomial(), cos_polynomial()
    with np.errstate(all="ignore"):
        ax = np.abs(x)
        j = np.floor(np.nan_to_num(ax * constant_f32("trig.four_over_pi"), posinf=0.0)).astype(np.int64)
        j = (j + 1) & ~np.int64(1)
        y = j.astype(_F32)
        r = ((ax - y * constant_f32("trig.dp1")) - y * constant_f32("trig.dp2")) - y * constant_f32("trig.dp3")
        z = r * r
        ys = (_horner(sp.values(), z) * z) * r + r
        yc = ((_horner(cp.values(), z) * z) * z - _F32(0.5) * z) + _F32(1.0)

    b1 = (j >> 1) & 1 == 1
    b2 = (j >> 2) & 1 == 1
    s = _flip_sign(np.where(b1, yc, ys).astype(_F32), np.signbit(x) ^ b2)
    c = _flip_sign(np.where(b1, ys, yc).astype(_F32), b1 ^ b2)
    bad = ~np.isfinite(x)
    return _nan_to_canonical(s, bad), _nan_to_canonical(c, bad)


def _fold_sum(terms: Sequence[npt.NDArray[np.float32]], order: str) -> npt.NDArray[np.float32]:
    if order not in ORDERS:
        raise ValueError(f'unknown accumulation order "{order}"')
    seq: List[npt.NDArray[np.float32]] = list(terms) if order == "ascending" else list(terms)[::-1]
    acc = seq[0]
    for t in seq[1:]:
        acc = acc + t
    return acc


def host_softmax(x: npt.ArrayLike, order: str = "ascending") -> npt.NDArray[np.float32]:
    """
    Row-wise softmax of a 2D array: max, subtract, exp, sum and divide.
    """
    x = np.asarray(x, dtype=_F32)
    if x.ndim != 2 or x.shape[1] == 0:
        raise ValueError("softmax requires a 2D array with non-empty rows")
    with np.errstate(all="ignore"):
        m = x[:, 0]
        for j in range(1, x.shape[1]):
            m = _max(m, x[:, j])
        e = host_exp(x - m[:, np.newaxis])
        s = _fold_sum([e[:, j] for j in range(x.shape[1])], order)
        return e / s[:, np.newaxis]


def host_linear(x: npt.ArrayLike, weights: LinearWeights, order: str = "ascending") -> npt.NDArray[np.float32]:
    """
    y[b, o] = sum_i x[b, i] * w[o, i] (+ b[o]), accumulated sequentially in the given order.
    """
    x = np.asarray(x, dtype=_F32)
    if x.ndim != 2 or x.shape[1] != weights.in_features:
        raise ValueError(f"expected inputs with shape (batch, {weights.in_features}), found {x.shape}")
    with np.errstate(all="ignore"):
        y = _fold_sum([x[:, i : i + 1] * weights.w[:, i] for i in range(weights.in_features)], order)
        if weights.b is not None:
            y = y + weights.b
    return y


def host_rsqrt(x: npt.ArrayLike) -> npt.NDArray[np.float32]:
    x = np.asarray(x, dtype=_F32)
    return _exact_op(_rsqrt_exact, PrecisionFormat.FP32, x.astype(np.float64)).astype(_F32)


def host_mul3(a: npt.ArrayLike, b: npt.ArrayLike, s: npt.ArrayLike) -> npt.NDArray[np.float32]:
    """
    a * b * s with a single rounding.
    """
    a, b, s = (np.asarray(t, dtype=_F32).astype(np.float64) for t in (a, b, s))
    return _exact_op(_mul3_exact, PrecisionFormat.FP32, a, b, s).astype(_F32)


def _mean_square(x: npt.NDArray[np.float32], order: str) -> npt.NDArray[np.float32]:
    sq = x * x
    return _fold_sum([sq[:, j] for j in range(x.shape[1])], order) / _F32(x.shape[1])


def host_rmsnorm(
    x: npt.ArrayLike, gamma: npt.ArrayLike, eps: np.float32, order: str = "ascending"
) -> npt.NDArray[np.float32]:
    x = np.asarray(x, dtype=_F32)
    gamma = np.asarray(gamma, dtype=_F32)
    if x.ndim != 2 or x.shape[1] == 0:
        raise ValueError("rmsnorm requires a 2D array with non-empty rows")
    with np.errstate(all="ignore"):
        inv = host_rsqrt(_mean_square(x, order) + _F32(eps))
        return host_mul3(np.broadcast_to(gamma, x.shape), x, np.broadcast_to(inv[:, np.newaxis], x.shape))


def rope_frequencies(d: int, base: float = 10000.0) -> npt.NDArray[np.float32]:
    """
    base^(-2i/d) for each rotation pair, rounded once to FP32.
    """
    if d < 2 or d % 2 != 0:
        raise ValueError(f"rotary embeddings require an even dimension (found {d})")
    return np.power(float(base), -2.0 * np.arange(d // 2, dtype=np.float64) / d).astype(_F32)


def host_rope(x: npt.ArrayLike, positions: npt.ArrayLike, base: float = 10000.0) -> npt.NDArray[np.float32]:
    x = np.asarray(x, dtype=_F32)
    positions = np.asarray(positions).reshape(-1)
    if x.ndim != 2 or len(positions) != x.shape[0]:
        raise ValueError("expected one position per row")
    inv_freq = rope_frequencies(x.shape[1], base)
    with np.errstate(all="ignore"):
        theta = positions.astype(_F32)[:, np.newaxis] * inv_freq
        s, c = host_sincos(theta)
        x0, x1 = x[:, 0::2], x[:, 1::2]
        out = np.empty_like(x)
        out[:, 0::2] = x0 * c - x1 * s
        out[:, 1::2] = x0 * s + x1 * c
    return out


def causal_mask(seq_len: int) -> npt.NDArray[np.float32]:
    mask = np.zeros((seq_len, seq_len), dtype=_F32)
    mask[np.triu_indices(seq_len, k=1)] = -np.inf
    return mask


def host_attention(
    q: npt.ArrayLike, k: npt.ArrayLike, v: npt.ArrayLike, n_heads: int, causal: bool = True, order: str = "ascending"
) -> npt.NDArray[np.float32]:
    q, k, v = (np.asarray(t, dtype=_F32) for t in (q, k, v))
    if q.shape != k.shape or q.shape != v.shape or q.ndim != 2:
        raise ValueError("q, k and v must be 2D arrays with identical shapes")
    t_len, d = q.shape
    if d % n_heads != 0:
        raise ValueError("model dimension must be divisible by the number of heads")
    dk = d // n_heads
    out = np.empty_like(q)
    with np.errstate(all="ignore"):
        scale = np.sqrt(_F32(dk))
        for h in range(n_heads):
            cols = slice(h * dk, (h + 1) * dk)
            qh, kh, vh = q[:, cols], k[:, cols], v[:, cols]
            scores = _fold_sum([qh[:, j : j + 1] * kh[:, j] for j in range(dk)], order) / scale
            if causal:
                scores = scores + causal_mask(t_len)
            p = host_softmax(scores, order)
            out[:, cols] = _fold_sum([p[:, s : s + 1] * vh[s] for s in range(t_len)], order)
    return out


def host_block(
    x: npt.ArrayLike, weights: BlockWeights, config: TransformerBlockConfig, order: str = "ascending"
) -> npt.NDArray[np.float32]:
    x = np.asarray(x, dtype=_F32)
    eps = config.eps_value
    positions = np.arange(x.shape[0])
    with np.errstate(all="ignore"):
        h = host_rmsnorm(x, weights.attn_norm, eps, order)
        q = host_linear(h, weights.wq, order)
        k = host_linear(h, weights.wk, order)
        v = host_linear(h, weights.wv, order)
        dh = config.d_head
        q = _rope_heads(q, positions, dh, config.rope_base)
        k = _rope_heads(k, positions, dh, config.rope_base)
        a = host_attention(q, k, v, config.n_heads, causal=True, order=order)
        x = x + host_linear(a, weights.wo, order)
        h = host_rmsnorm(x, weights.ffn_norm, eps, order)
        u = host_silu(host_linear(h, weights.w_up, order))
        return x + host_linear(u, weights.w_down, order)


def _rope_heads(x: npt.NDArray[np.float32], positions: npt.NDArray, dh: int, base: float) -> npt.NDArray[np.float32]:
    t_len, d = x.shape
    rows = x.reshape(t_len * (d // dh), dh)
    return host_rope(rows, np.repeat(positions, d // dh), base).reshape(t_len, d)


def _libm(fn: Callable[[npt.NDArray[np.float64]], npt.NDArray[np.float64]]):
    def wrapped(x: npt.ArrayLike) -> npt.NDArray[np.float32]:
        x64 = np.asarray(x, dtype=_F32).astype(np.float64)
        with np.errstate(all="ignore"):
            return fn(x64).astype(_F32)

    return wrapped


def _sigmoid64(x):
    return 1.0 / (1.0 + np.exp(-x))


libm_exp = _libm(np.exp)
libm_sigmoid = _libm(_sigmoid64)
libm_tanh = _libm(np.tanh)
libm_silu = _libm(lambda x: x * _sigmoid64(x))
libm_gelu = _libm(lambda x: x * _sigmoid64(1.702 * x))
libm_sin = _libm(np.sin)
libm_cos = _libm(np.cos)


def fused_softmax(x: npt.ArrayLike) -> npt.NDArray[np.float32]:
    """
    Softmax with FP32 max, subtraction, sum and division around a correctly rounded exponential.
    """
    x = np.asarray(x, dtype=_F32)
    if x.ndim != 2 or x.shape[1] == 0:
        raise ValueError("softmax requires a 2D array with non-empty rows")
    with np.errstate(all="ignore"):
        e = libm_exp(x - x.max(axis=1, keepdims=True))
        s = _fold_sum([e[:, j] for j in range(x.shape[1])], "ascending")
        return e / s[:, np.newaxis]


def fused_rmsnorm(x: npt.ArrayLike, gamma: npt.ArrayLike, eps: np.float32) -> npt.NDArray[np.float32]:
    """
    RMSNorm with FP32 statistics and gamma * x / sqrt(mean + eps) rounded once per element.
    """
    x = np.asarray(x, dtype=_F32)
    gamma = np.asarray(gamma, dtype=_F32)
    if x.ndim != 2 or x.shape[1] == 0:
        raise ValueError("rmsnorm requires a 2D array with non-empty rows")
    with np.errstate(all="ignore"):
        ms = _mean_square(x, "ascending") + _F32(eps)
    g64 = np.broadcast_to(gamma, x.shape).astype(np.float64)
    ms64 = np.broadcast_to(ms[:, np.newaxis], x.shape).astype(np.float64)
    return _exact_op(_scaled_rsqrt_exact, PrecisionFormat.FP32, g64, x.astype(np.float64), ms64).astype(_F32)
