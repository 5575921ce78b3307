# Copyright (C) 2025 spikefp contributors
#
# SPDX-License-Identifier: MIT

import dataclasses
from typing import Dict, Optional

import numpy as np
import numpy.typing as npt

# 1e-6 as a FP32 bit pattern
DEFAULT_RMSNORM_EPS = 0x358637BD


def _as_f32(values: npt.ArrayLike, ndim: int, name: str) -> npt.NDArray[np.float32]:
    values = np.asarray(values)
    if values.dtype != np.float32:
        raise ValueError(f"{name} must be an array of float32 values (found {values.dtype})")
    if values.ndim != ndim:
        raise ValueError(f"{name} must have {ndim} dimension(s) (found {values.ndim})")
    return values


class LinearWeights(object):
    """
    Weights of a fully connected layer computing y = W x + b.
    """

    def __init__(self, w: npt.NDArray[np.float32], b: Optional[npt.NDArray[np.float32]] = None):
        """
        Parameters
        ----------
        w
            the weight matrix with shape (out, in)
        b
            the optional bias vector with shape (out,). No addition is performed when b is None.
        """
        self._w = _as_f32(w, 2, "w")
        if self._w.shape[0] == 0 or self._w.shape[1] == 0:
            raise ValueError("weight matrix cannot be empty")
        self._b = None
        if b is not None:
            self._b = _as_f32(b, 1, "b")
            if len(self._b) != self._w.shape[0]:
                raise ValueError(f"bias has {len(self._b)} values, expected {self._w.shape[0]}")

    def __repr__(self) -> str:
        return f"LinearWeights(out={self.out_features}, in={self.in_features}, bias={self._b is not None})"

    @property
    def w(self) -> npt.NDArray[np.float32]:
        return self._w

    @property
    def b(self) -> Optional[npt.NDArray[np.float32]]:
        return self._b

    @property
    def in_features(self) -> int:
        return self._w.shape[1]

    @property
    def out_features(self) -> int:
        return self._w.shape[0]

    @staticmethod
    def random(
        out_features: int, in_features: int, rng: np.random.Generator, bias: bool = False, scale: Optional[float] = None
    ) -> "LinearWeights":
        if scale is None:
            scale = 1.0 / np.sqrt(in_features)
        w = rng.normal(0.0, scale, size=(out_features, in_features)).astype(np.float32)
        b = rng.normal(0.0, scale, size=out_features).astype(np.float32) if bias else None
        return LinearWeights(w, b)

    @staticmethod
    def zeros(out_features: int, in_features: int) -> "LinearWeights":
        return LinearWeights(np.zeros((out_features, in_features), dtype=np.float32))


@dataclasses.dataclass(frozen=True)
class TransformerBlockConfig:
    d_model: int
    n_heads: int
    d_ff: int
    seq_len: int
    rope_base: float = 10000.0
    eps: int = DEFAULT_RMSNORM_EPS

    def __post_init__(self):
        for name in ("d_model", "n_heads", "d_ff", "seq_len"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be a positive integer")
        if self.d_model % self.n_heads != 0:
            raise ValueError(f"d_model ({self.d_model}) must be divisible by n_heads ({self.n_heads})")
        if self.d_head % 2 != 0:
            raise ValueError(f"head dimension must be even for rotary embeddings (found {self.d_head})")
        if self.rope_base <= 0:
            raise ValueError("rope_base must be positive")
        if not 0 <= self.eps < 1 << 32:
            raise ValueError("eps must be a FP32 bit pattern")

    @property
    def d_head(self) -> int:
        return self.d_model // self.n_heads

    @property
    def eps_value(self) -> np.float32:
        return np.array([self.eps], dtype=np.uint32).view(np.float32)[0]


@dataclasses.dataclass(frozen=True)
class BlockWeights:
    """
    Parameters of a pre-norm transformer block: RMSNorm, attention, RMSNorm and a SiLU feed-forward network.
    Projections carry no bias.
    """

    attn_norm: npt.NDArray[np.float32]
    wq: LinearWeights
    wk: LinearWeights
    wv: LinearWeights
    wo: LinearWeights
    ffn_norm: npt.NDArray[np.float32]
    w_up: LinearWeights
    w_down: LinearWeights

    def check(self, config: TransformerBlockConfig):
        d, f = config.d_model, config.d_ff
        for name, gamma in (("attn_norm", self.attn_norm), ("ffn_norm", self.ffn_norm)):
            _as_f32(gamma, 1, name)
            if len(gamma) != d:
                raise ValueError(f"{name} has {len(gamma)} values, expected {d}")
        expected = {"wq": (d, d), "wk": (d, d), "wv": (d, d), "wo": (d, d), "w_up": (f, d), "w_down": (d, f)}
        for name, shape in expected.items():
            found = getattr(self, name).w.shape
            if found != shape:
                raise ValueError(f"{name} has shape {found}, expected {shape}")

    def linear_layers(self) -> Dict[str, LinearWeights]:
        return {name: getattr(self, name) for name in ("wq", "wk", "wv", "wo", "w_up", "w_down")}

    @staticmethod
    def random(config: TransformerBlockConfig, rng: np.random.Generator, residual_scale: float = 1.0) -> "BlockWeights":
        """
        Draw normal weights with variance 1 / fan_in. The projections feeding the residual stream
        (wo and w_down) are further multiplied by residual_scale.
        """
        if not residual_scale > 0:
            raise ValueError("residual_scale must be positive")
        d, f = config.d_model, config.d_ff
        return BlockWeights(
            attn_norm=(1.0 + 0.1 * rng.standard_normal(d)).astype(np.float32),
            wq=LinearWeights.random(d, d, rng),
            wk=LinearWeights.random(d, d, rng),
            wv=LinearWeights.random(d, d, rng),
            wo=LinearWeights.random(d, d, rng, scale=residual_scale / np.sqrt(d)),
            ffn_norm=(1.0 + 0.1 * rng.standard_normal(d)).astype(np.float32),
            w_up=LinearWeights.random(f, d, rng),
            w_down=LinearWeights.random(d, f, rng, scale=residual_scale / np.sqrt(f)),
        )

    @staticmethod
    def zeros(config: TransformerBlockConfig) -> "BlockWeights":
        d, f = config.d_model, config.d_ff
        ones = np.ones(d, dtype=np.float32)
        return BlockWeights(
            attn_norm=ones,
            wq=LinearWeights.zeros(d, d),
            wk=LinearWeights.zeros(d, d),
            wv=LinearWeights.zeros(d, d),
            wo=LinearWeights.zeros(d, d),
            ffn_norm=ones.copy(),
            w_up=LinearWeights.zeros(f, d),
            w_down=LinearWeights.zeros(d, f),
        )
