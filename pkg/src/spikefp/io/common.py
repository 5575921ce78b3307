# Copyright (C) 2025 spikefp contributors
#
# SPDX-License-Identifier: MIT

import functools
import io
import json
import math
import pathlib
import re
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import numpy.typing as npt
import pandas as pd
import structlog

from spikefp.algorithms.encoding import quantize
from spikefp.data_structures import (
    BitPlaneTensor,
    BlockWeights,
    LinearWeights,
    PrecisionFormat,
    RunManifest,
)
from spikefp.utils import sha256_digest

_BP_MAGIC = "SPIKEFP-BP"
_BP_VERSION = 1
_HEX_TOKEN = re.compile(r"^0[xX][0-9a-fA-F]+$")


@functools.cache
def get_stderr():
    try:
        import rich.console

        return rich.console.Console(stderr=True)
    except ImportError:
        import sys

        return sys.stderr


def check_output_path(path: pathlib.Path, force: bool):
    """
    Raise FileExistsError if path exists and force is False. Otherwise, make sure that the parent directory exists.
    """
    path = pathlib.Path(path)
    if path.exists() and not force:
        raise FileExistsError(f'Refusing to overwrite existing file "{path}". Pass --force to overwrite.')
    path.parent.mkdir(parents=True, exist_ok=True)


def parse_values(text: str, fmt: PrecisionFormat, allow_decimal: bool = False) -> npt.NDArray:
    """
    Parse values separated by commas or whitespace into bit patterns.

    Parameters
    ----------
    text
        the text to parse. Lines starting with # are ignored.
    fmt
        the precision format of the values
    allow_decimal
        accept decimal numbers, which are rounded to fmt. Otherwise, only hex bit patterns are accepted.

    Returns
    -------
    npt.NDArray
        the bit patterns
    """
    tokens = []
    for line in text.splitlines():
        if line.lstrip().startswith("#"):
            continue
        tokens.extend(t for t in re.split(r"[,\s]+", line) if t != "")

    patterns = []
    for i, tok in enumerate(tokens):
        if _HEX_TOKEN.match(tok):
            p = int(tok, 16)
            if p >> fmt.bit_width != 0:
                raise ValueError(f'value #{i} ("{tok}") does not fit in {fmt.bit_width} bits')
            patterns.append(p)
            continue
        if not allow_decimal:
            raise ValueError(f'value #{i} ("{tok}") is not a hex bit pattern. Pass --decimal to accept decimal values.')
        try:
            patterns.append(int(quantize([float(tok)], fmt)[0]))
        except ValueError:
            raise ValueError(f'value #{i} ("{tok}") is not a valid number') from None

    return np.array(patterns, dtype=fmt.uint_dtype)


def write_bitplanes(path: pathlib.Path, tensor: BitPlaneTensor, force: bool = False):
    """
    Write a tensor to a bit-plane file.

    The file starts with a text header "SPIKEFP-BP <version> <format> <dim0>x<dim1>...\\n" followed by
    the planes packed with numpy.packbits (plane-major, MSB-first).
    """
    path = pathlib.Path(path)
    check_output_path(path, force)
    shape = "x".join(str(d) for d in tensor.shape) if len(tensor.shape) != 0 else "scalar"
    header = f"{_BP_MAGIC} {_BP_VERSION} {tensor.format.value} {shape}\n".encode()
    with path.open("wb") as f:
        f.write(header)
        f.write(np.packbits(tensor.planes.reshape(-1)).tobytes())


def read_bitplanes(path: pathlib.Path) -> BitPlaneTensor:
    data = pathlib.Path(path).read_bytes()
    header, sep, payload = data.partition(b"\n")
    try:
        magic, version, fmt, shape = header.decode().split(" ")
    except (UnicodeDecodeError, ValueError):
        raise RuntimeError(f'"{path}" is not a valid bit-plane file') from None

    if sep == b"" or magic != _BP_MAGIC:
        raise RuntimeError(f'"{path}" is not a valid bit-plane file')
    if int(version) != _BP_VERSION:
        raise RuntimeError(f'"{path}": unsupported bit-plane file version {version}')

    fmt = PrecisionFormat.from_name(fmt)
    shape = () if shape == "scalar" else tuple(int(d) for d in shape.split("x"))
    n = int(np.prod(shape, dtype=np.int64))
    nbits = fmt.bit_width * n
    if len(payload) != (nbits + 7) // 8:
        raise RuntimeError(f'"{path}": payload size does not match a {fmt.name} tensor with shape {shape}')

    planes = np.unpackbits(np.frombuffer(payload, dtype=np.uint8), count=nbits).astype(bool)
    return BitPlaneTensor(fmt, planes.reshape(fmt.bit_width, n), shape)


def _json_friendly(df: pd.DataFrame) -> List[Dict[str, Any]]:
    records = df.to_dict(orient="records")
    for rec in records:
        for k, v in rec.items():
            if isinstance(v, np.generic):
                v = v.item()
            if isinstance(v, float) and math.isnan(v):
                v = None
            rec[k] = v
    return records


def make_manifest(command: str, seed: int, params: Dict[str, Any]) -> RunManifest:
    """
    Build the manifest of a run. The config digest is the sha256 of the canonical JSON of params.
    """
    from importlib.metadata import version

    canonical = json.dumps(params, sort_keys=True, separators=(",", ":"), default=str)
    return RunManifest(
        command=command,
        seed=int(seed),
        config_digest=sha256_digest(canonical.encode()),
        tool_version=version("spikefp"),
    )


def format_table(df: pd.DataFrame, manifest: RunManifest, as_json: bool = False) -> str:
    """
    Format a table together with the manifest describing how it was produced.

    CSV tables start with one "# key: value" line per manifest field.
    JSON tables are an object with "manifest" and "rows" keys.
    """
    if as_json:
        payload = {"manifest": manifest.to_dict(), "rows": _json_friendly(df)}
        return json.dumps(payload, indent=2) + "\n"

    return manifest.to_comment_lines() + df.to_csv(index=False, lineterminator="\n")


def write_table(
    df: pd.DataFrame,
    path: pathlib.Path,
    manifest: RunManifest,
    force: bool = False,
    as_json: bool = False,
):
    """
    Write the output of format_table() to the given path.
    """
    path = pathlib.Path(path)
    check_output_path(path, force)
    logger = structlog.get_logger().bind(step="IO")

    with path.open("w", newline="") as f:
        f.write(format_table(df, manifest, as_json))

    logger.info('written %d row(s) to "%s"', len(df), path)


def read_table(path: pathlib.Path) -> Tuple[Dict[str, str], pd.DataFrame]:
    """
    Read a table written by write_table() and return its manifest and rows.
    """
    path = pathlib.Path(path)
    text = path.read_text()
    if text.lstrip().startswith("{"):
        payload = json.loads(text)
        return payload["manifest"], pd.DataFrame(payload["rows"])

    manifest = {}
    lines = text.splitlines(keepends=True)
    i = 0
    while i < len(lines) and lines[i].startswith("#"):
        key, _, value = lines[i][1:].strip().partition(":")
        manifest[key.strip()] = value.strip()
        i += 1

    return manifest, pd.read_csv(io.StringIO("".join(lines[i:])))


def _tensor_entry(values: npt.NDArray[np.float32]) -> Dict[str, Any]:
    patterns = np.ascontiguousarray(values, dtype=np.float32).view(np.uint32).reshape(-1)
    return {
        "shape": list(values.shape),
        "values": [f"0x{int(p):08X}" for p in patterns],
        "sha256": sha256_digest(patterns.astype(">u4").tobytes()),
    }


def _parse_tensor_entry(name: str, entry: Dict[str, Any]) -> npt.NDArray[np.float32]:
    try:
        shape = tuple(int(d) for d in entry["shape"])
        values = entry["values"]
        digest = entry["sha256"]
    except (KeyError, TypeError, ValueError):
        raise RuntimeError(f'tensor "{name}": expected an object with "shape", "values" and "sha256" keys') from None

    if any(not isinstance(v, str) or not _HEX_TOKEN.match(v) for v in values):
        raise RuntimeError(f'tensor "{name}": values must be hex bit patterns')
    patterns = np.array([int(v, 16) for v in values], dtype=np.uint64)
    if len(patterns) != 0 and int(patterns.max()) >> 32 != 0:
        raise RuntimeError(f'tensor "{name}": values must be FP32 bit patterns')
    patterns = patterns.astype(np.uint32)

    if int(np.prod(shape, dtype=np.int64)) != len(patterns):
        raise RuntimeError(f'tensor "{name}": shape {shape} does not match {len(patterns)} values')
    if sha256_digest(patterns.astype(">u4").tobytes()) != digest:
        raise RuntimeError(f'tensor "{name}": checksum mismatch')

    return patterns.view(np.float32).reshape(shape)


def write_block_weights(path: pathlib.Path, blocks: Sequence[BlockWeights], force: bool = False):
    """
    Write the weights of a stack of transformer blocks to a JSON file.

    Each tensor is stored as an object with its shape, its values as hex FP32 bit patterns
    and the sha256 of the big-endian patterns.
    """
    check_output_path(path, force)
    payload = {"blocks": []}
    for w in blocks:
        entry = {"attn_norm": _tensor_entry(w.attn_norm), "ffn_norm": _tensor_entry(w.ffn_norm)}
        for name, lw in w.linear_layers().items():
            entry[name] = _tensor_entry(lw.w)
        payload["blocks"].append(entry)
    pathlib.Path(path).write_text(json.dumps(payload, indent=1) + "\n")


def load_block_weights(path: pathlib.Path, config: Optional[Any] = None) -> List[BlockWeights]:
    """
    Load the weights written by write_block_weights().
    When config is provided, the shape of every tensor is validated against it.
    """
    try:
        payload = json.loads(pathlib.Path(path).read_text())
        entries = payload["blocks"]
    except (json.JSONDecodeError, KeyError, TypeError):
        raise RuntimeError(f'"{path}" is not a valid weight file') from None

    blocks = []
    for i, entry in enumerate(entries):
        try:
            tensors = {k: _parse_tensor_entry(f"blocks[{i}].{k}", v) for k, v in entry.items()}
            w = BlockWeights(
                attn_norm=tensors["attn_norm"],
                ffn_norm=tensors["ffn_norm"],
                **{k: LinearWeights(tensors[k]) for k in ("wq", "wk", "wv", "wo", "w_up", "w_down")},
            )
        except KeyError as e:
            raise RuntimeError(f'"{path}": block {i} is missing tensor {e}') from None
        except ValueError as e:
            raise RuntimeError(f'"{path}": block {i}: {e}') from None
        if config is not None:
            try:
                w.check(config)
            except ValueError as e:
                raise RuntimeError(f'"{path}": block {i}: {e}') from None
        blocks.append(w)

    return blocks
