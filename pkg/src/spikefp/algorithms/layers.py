# Copyright (C) 2025 spikefp contributors
#
# SPDX-License-Identifier: MIT

"""
Neural-network layers composed from FP32 spiking arithmetic.

Matrices are laid out across the lanes of a BitWord in row-major order.
Element-wise products are evaluated by a single multiplier spanning all lanes, while
reductions are sequential additions in a fixed order (ascending index unless stated otherwise).
"""

import dataclasses
from typing import Callable, Dict, Optional, Tuple

import numpy as np
import numpy.typing as npt

from spikefp.algorithms.encoding import encode
from spikefp.algorithms.fparith import FpUnit, fp_add, tensor_to_word, word_to_tensor
from spikefp.algorithms.gates import mux_
from spikefp.algorithms.nonlinear import (
    fold_sum,
    fp_silu,
    silu_word,
    sincos_word,
    softmax_word,
)
from spikefp.algorithms.reference import (
    f32_patterns,
    f32_values,
    host_linear,
    host_op,
    host_silu,
    rope_frequencies,
)
from spikefp.data_structures import (
    BitPlaneTensor,
    BitWord,
    BlockWeights,
    GateNetlist,
    LinearWeights,
    PrecisionFormat,
    TransformerBlockConfig,
)

_FP32 = PrecisionFormat.FP32
_NEG_INF = 0xFF800000


def _f32_word(c: GateNetlist, values: npt.ArrayLike) -> BitWord:
    """
    Register FP32 values (e.g. weights) as circuit inputs, one value per lane.
    """
    return c.input_word(f32_patterns(np.asarray(values, dtype=np.float32).reshape(-1)), 32)


def _f32_const(c: GateNetlist, values: npt.ArrayLike) -> BitWord:
    return c.const_words([int(p) for p in f32_patterns(np.asarray(values, dtype=np.float32).reshape(-1))], 32)


def _as_matrix(x: BitPlaneTensor, name: str = "x") -> Tuple[int, int]:
    if x.format != _FP32:
        raise ValueError(f"{name} must be a FP32 tensor (found {x.format.name})")
    if len(x.shape) == 1:
        return 1, x.shape[0]
    if len(x.shape) == 2:
        return x.shape
    raise ValueError(f"{name} must be a 1D or 2D tensor")


def _lanes_to_tensor(word: BitWord, shape) -> BitPlaneTensor:
    n = int(np.prod(shape))
    return word_to_tensor(_FP32, word.broadcast(n), tuple(shape))


def linear_word(
    unit: FpUnit, x: BitWord, batch: int, weights: LinearWeights, order: str = "ascending"
) -> BitWord:
    """
    y[b, o] = x[b, 0] * w[o, 0] + x[b, 1] * w[o, 1] + ... + b[o].

    Parameters
    ----------
    unit
        the FP32 unit used to build the circuit
    x
        the inputs with batch * in_features lanes
    batch
        the number of input rows
    weights
        the layer weights
    order
        the accumulation order over the input index ("ascending" or "reversed")

    Returns
    -------
    BitWord
        the outputs with batch * out_features lanes
    """
    c = unit.circuit
    n_out, n_in = weights.out_features, weights.in_features
    x = x.broadcast(batch * n_in)

    lane = np.arange(batch * n_out * n_in)
    b_idx, o_idx, i_idx = lane // (n_out * n_in), (lane // n_in) % n_out, lane % n_in
    products = unit.mul(x.take(b_idx * n_in + i_idx), _f32_word(c, weights.w[o_idx, i_idx]))

    base = np.arange(batch * n_out) * n_in
    y = fold_sum(unit, [products.take(base + i) for i in range(n_in)], order)
    if weights.b is not None:
        y = unit.add(y, _f32_word(c, np.tile(weights.b, batch)))
    return y


def rmsnorm_word(
    unit: FpUnit,
    x: BitWord,
    rows: int,
    d: int,
    gamma: npt.NDArray[np.float32],
    eps: np.float32,
    order: str = "ascending",
) -> BitWord:
    """
    gamma * x * (1 / sqrt(sum(x * x) / d + eps)) for each row.

    The reciprocal square root and the final three-way product are rounded once each.
    """
    c = unit.circuit
    x = x.broadcast(rows * d)
    row_of = np.repeat(np.arange(rows), d)

    sq = unit.mul(x, x)
    total = fold_sum(unit, [sq.take(np.arange(rows) * d + j) for j in range(d)], order)
    mean = unit.div(total, unit.const_float(float(d)))
    inv = unit.rsqrt(unit.add(mean, _f32_const(c, [eps])))
    return unit.mul3(_f32_word(c, np.tile(gamma, rows)), x, inv.take(row_of))


def rope_word(unit: FpUnit, x: BitWord, rows: int, d: int, positions: npt.ArrayLike, base: float = 10000.0) -> BitWord:
    """
    Rotate consecutive pairs (x[2i], x[2i + 1]) by position * base^(-2i/d).
    """
    c = unit.circuit
    inv_freq = rope_frequencies(d, base)
    half = d // 2
    n_pairs = rows * half
    x = x.broadcast(rows * d)

    pair = np.arange(n_pairs)
    r_idx, i_idx = pair // half, pair % half
    positions = np.asarray(positions).reshape(-1)
    theta = unit.mul(
        _f32_const(c, positions[r_idx].astype(np.float32)),
        _f32_const(c, inv_freq[i_idx]),
    )
    s, co = sincos_word(unit, theta)

    # first half of the lanes computes x0 * cos - x1 * sin, second half x0 * sin + x1 * cos
    dup = np.concatenate([pair, pair])
    first = c.const_words([1] * n_pairs + [0] * n_pairs, 1)
    s2, c2 = s.take(dup), co.take(dup)
    x0 = x.take(np.tile(r_idx * d + 2 * i_idx, 2))
    x1 = x.take(np.tile(r_idx * d + 2 * i_idx + 1, 2))

    p = unit.mul(x0, mux_(c, first, c2, s2))
    q = unit.mul(x1, mux_(c, first, s2, c2))
    q = mux_(c, first, unit.neg(q), q)
    y = unit.add(p, q)

    out = np.empty(rows * d, dtype=np.int64)
    out[r_idx * d + 2 * i_idx] = pair
    out[r_idx * d + 2 * i_idx + 1] = n_pairs + pair
    return y.take(out)


def attention_word(
    unit: FpUnit,
    q: BitWord,
    k: BitWord,
    v: BitWord,
    seq_len: int,
    d: int,
    n_heads: int,
    causal: bool = True,
    order: str = "ascending",
) -> BitWord:
    """
    softmax(q k^T / sqrt(d_k) + mask) v for each head. Inputs and output have seq_len * d lanes.
    """
    c = unit.circuit
    t_len, dk = seq_len, d // n_heads
    q, k, v = (w.broadcast(t_len * d) for w in (q, k, v))

    # scores[h, t, s]
    lane = np.arange(n_heads * t_len * t_len * dk)
    h, t, s, j = lane // (t_len * t_len * dk), (lane // (t_len * dk)) % t_len, (lane // dk) % t_len, lane % dk
    prod = unit.mul(q.take(t * d + h * dk + j), k.take(s * d + h * dk + j))
    base = np.arange(n_heads * t_len * t_len) * dk
    scores = fold_sum(unit, [prod.take(base + jj) for jj in range(dk)], order)
    scores = unit.div(scores, unit.sqrt(unit.const_float(float(dk))))

    if causal:
        cell = np.arange(n_heads * t_len * t_len)
        future = (cell % t_len) > (cell // t_len) % t_len
        scores = unit.add(scores, c.const_words([_NEG_INF if f else 0 for f in future], 32))

    p = softmax_word(unit, scores, n_heads * t_len, t_len, order)

    # out[t, h * dk + j] = sum_s p[h, t, s] * v[s, h * dk + j]
    lane = np.arange(t_len * d * t_len)
    t, col, s = lane // (d * t_len), (lane // t_len) % d, lane % t_len
    h, j = col // dk, col % dk
    prod = unit.mul(p.take((h * t_len + t) * t_len + s), v.take(s * d + h * dk + j))
    base = np.arange(t_len * d) * t_len
    return fold_sum(unit, [prod.take(base + ss) for ss in range(t_len)], order)


def block_word(
    unit: FpUnit, x: BitWord, weights: BlockWeights, config: TransformerBlockConfig, order: str = "ascending"
) -> BitWord:
    t_len, d, n_heads = config.seq_len, config.d_model, config.n_heads
    eps = config.eps_value
    positions = np.repeat(np.arange(t_len), n_heads)

    h = rmsnorm_word(unit, x, t_len, d, weights.attn_norm, eps, order)
    q = linear_word(unit, h, t_len, weights.wq, order)
    k = linear_word(unit, h, t_len, weights.wk, order)
    v = linear_word(unit, h, t_len, weights.wv, order)
    q = rope_word(unit, q, t_len * n_heads, config.d_head, positions, config.rope_base)
    k = rope_word(unit, k, t_len * n_heads, config.d_head, positions, config.rope_base)
    a = attention_word(unit, q, k, v, t_len, d, n_heads, causal=True, order=order)
    x = unit.add(x, linear_word(unit, a, t_len, weights.wo, order))

    h = rmsnorm_word(unit, x, t_len, d, weights.ffn_norm, eps, order)
    u = silu_word(unit, linear_word(unit, h, t_len, weights.w_up, order))
    return unit.add(x, linear_word(unit, u, t_len, weights.w_down, order))


def _unit(lanes: int, netlist: Optional[GateNetlist]) -> FpUnit:
    return FpUnit(GateNetlist(lanes=lanes) if netlist is None else netlist, _FP32)


def linear_forward(
    x: BitPlaneTensor, weights: LinearWeights, netlist: Optional[GateNetlist] = None, order: str = "ascending"
) -> BitPlaneTensor:
    batch, n_in = _as_matrix(x)
    if n_in != weights.in_features:
        raise ValueError(f"input has {n_in} features, layer expects {weights.in_features}")
    unit = _unit(x.n_elements, netlist)
    y = linear_word(unit, tensor_to_word(unit.circuit, x), batch, weights, order)
    shape = (weights.out_features,) if len(x.shape) == 1 else (batch, weights.out_features)
    return _lanes_to_tensor(y, shape)


def rmsnorm_forward(
    x: BitPlaneTensor,
    gamma: npt.ArrayLike,
    eps: float | np.float32 = 1e-6,
    netlist: Optional[GateNetlist] = None,
    order: str = "ascending",
) -> BitPlaneTensor:
    rows, d = _as_matrix(x)
    if d == 0 or x.n_elements == 0:
        raise ValueError("rmsnorm requires a non-empty input")
    gamma = np.asarray(gamma, dtype=np.float32)
    if gamma.shape != (d,):
        raise ValueError(f"gamma must have shape ({d},), found {gamma.shape}")
    unit = _unit(x.n_elements, netlist)
    y = rmsnorm_word(unit, tensor_to_word(unit.circuit, x), rows, d, gamma, np.float32(eps), order)
    return _lanes_to_tensor(y, x.shape)


def rope_apply(
    x: BitPlaneTensor, position: int | npt.ArrayLike, base: float = 10000.0, netlist: Optional[GateNetlist] = None
) -> BitPlaneTensor:
    """
    Apply rotary position embeddings.

    Parameters
    ----------
    x
        a FP32 vector or a (rows, d) matrix. d must be even.
    position
        the position of each row (a scalar applies to all rows)
    base
        the frequency base
    netlist
        the netlist where the circuit is built

    Returns
    -------
    BitPlaneTensor
        the rotated tensor
    """
    rows, d = _as_matrix(x)
    if d % 2 != 0:
        raise ValueError(f"rotary embeddings require an even dimension (found {d})")
    positions = np.broadcast_to(np.asarray(position), (rows,))
    if np.any(positions < 0):
        raise ValueError("positions must be non-negative")
    unit = _unit(x.n_elements, netlist)
    y = rope_word(unit, tensor_to_word(unit.circuit, x), rows, d, positions, base)
    return _lanes_to_tensor(y, x.shape)


def attention_forward(
    q: BitPlaneTensor,
    k: BitPlaneTensor,
    v: BitPlaneTensor,
    n_heads: int,
    causal: bool = True,
    netlist: Optional[GateNetlist] = None,
    order: str = "ascending",
) -> BitPlaneTensor:
    if q.shape != k.shape or q.shape != v.shape or len(q.shape) != 2:
        raise ValueError("q, k and v must be 2D tensors with identical shapes")
    t_len, d = _as_matrix(q, "q")
    if n_heads < 1 or d % n_heads != 0:
        raise ValueError(f"model dimension {d} is not divisible by {n_heads} heads")
    unit = _unit(q.n_elements, netlist)
    c = unit.circuit
    words = [tensor_to_word(c, t) for t in (q, k, v)]
    y = attention_word(unit, *words, t_len, d, n_heads, causal=causal, order=order)
    return _lanes_to_tensor(y, q.shape)


def transformer_block_forward(
    x: BitPlaneTensor,
    weights: BlockWeights,
    config: TransformerBlockConfig,
    netlist: Optional[GateNetlist] = None,
    order: str = "ascending",
) -> BitPlaneTensor:
    t_len, d = _as_matrix(x)
    if (t_len, d) != (config.seq_len, config.d_model) or len(x.shape) != 2:
        raise ValueError(f"expected an input with shape ({config.seq_len}, {config.d_model}), found {x.shape}")
    weights.check(config)
    unit = _unit(x.n_elements, netlist)
    y = block_word(unit, tensor_to_word(unit.circuit, x), weights, config, order)
    return _lanes_to_tensor(y, x.shape)


@dataclasses.dataclass(frozen=True)
class IdentityCheckReport:
    function: str
    sample_count: int
    mismatches: int

    @property
    def exact(self) -> bool:
        return self.mismatches == 0


def _identity_pairs(x: npt.NDArray[np.float32], rng: np.random.Generator) -> Dict[str, Tuple[Callable, Callable]]:
    addend = np.float32(rng.normal())
    width = x.shape[-1] if x.ndim == 2 else 1
    weights = LinearWeights.random(width, width, rng, bias=True)
    const = BitPlaneTensor.from_patterns(_FP32, np.full(x.size, f32_patterns([addend])[0], dtype=np.uint32))

    def snn_linear(t: BitPlaneTensor) -> BitPlaneTensor:
        return linear_forward(t.reshape(*(x.shape if x.ndim == 2 else (x.size, 1))), weights)

    return {
        "identity": (lambda t: t, lambda v: v),
        "add_const": (
            lambda t: fp_add(t, const.reshape(*t.shape)),
            lambda v: f32_values(host_op("add", _FP32, f32_patterns(v), f32_patterns(np.full_like(v, addend)))),
        ),
        "silu": (fp_silu, host_silu),
        "linear": (snn_linear, lambda v: host_linear(v.reshape(-1, width), weights)),
    }


IDENTITY_CHECK_FUNCTIONS = ("identity", "add_const", "silu", "linear")


def ste_identity_check(x: npt.ArrayLike, function: str, seed: int = 0) -> IdentityCheckReport:
    """
    Check that decode(f_snn(encode(x))) equals f evaluated on x by the same-order host reference.

    When this holds bit-for-bit, the spike encoding and decoding behave as an exact identity,
    so straight-through gradients computed on decoded values are exact.
    """
    x = np.asarray(x, dtype=np.float32)
    if x.ndim not in {1, 2}:
        raise ValueError("x must be a 1D or 2D array")
    pairs = _identity_pairs(x, np.random.default_rng(seed))
    try:
        snn, host = pairs[function]
    except KeyError:
        raise ValueError(f'unknown function "{function}": choose one of {", ".join(IDENTITY_CHECK_FUNCTIONS)}') from None

    got = snn(encode(x, _FP32)).patterns().reshape(-1)
    want = f32_patterns(host(x)).reshape(-1)
    return IdentityCheckReport(function, int(got.size), int(np.count_nonzero(got != want)))

