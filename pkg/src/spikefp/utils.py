# Copyright (C) 2025 spikefp contributors
#
# SPDX-License-Identifier: MIT

import hashlib
import time
from typing import Dict, List, Optional, Sequence

import numpy as np


def pretty_format_elapsed_time(
    t0: float,
    t1: Optional[float] = None,
) -> str:
    """
    Format elapsed time between t1 and t0 as a human-readable string.

    Examples:
        123ns
        1.234us
        1.23ms
        1.23s
        1m:2.345s
        1h:2m:3.456s

    Parameters
    ----------
    t0: float
        start time in seconds.
    t1: Optional[float]
        end time in seconds.
        When not provided, use the current time.

    Returns
    -------
    str
        a human-friendly string representation of the elapsed time.
    """
    if t1 is None:
        t1 = time.time()

    delta = t1 - t0

    if delta < 1.0e-6:
        return f"{delta * 1.0e9:.0f}ns"
    if delta < 1.0e-3:
        return f"{delta * 1.0e6:.3f}us"
    if delta < 1.0:
        return f"{delta * 1000:.3f}ms"
    if delta < 60.0:
        return f"{delta:.3f}s"

    hours, rem = divmod(delta, 3600.0)
    minutes, seconds = divmod(rem, 60.0)
    if hours == 0:
        return f"{minutes:.0f}m:{seconds:.3f}s"
    return f"{hours:.0f}h:{minutes:.0f}m:{seconds:.3f}s"


def pretty_format_count(n: float) -> str:
    """
    Format large counts using k/M/G suffixes (e.g. 262144 -> "262k").
    """
    for div, suffix in ((1e9, "G"), (1e6, "M"), (1e3, "k")):
        if abs(n) >= div:
            return f"{n / div:.3g}{suffix}"
    return f"{n:.3g}"


def parse_list(text: str, dtype=float) -> List:
    """
    Parse a comma-separated list of numbers (e.g. "0.1,0.2,0.3").
    """
    tokens = [t.strip() for t in str(text).split(",")]
    tokens = [t for t in tokens if t != ""]
    if len(tokens) == 0:
        raise ValueError(f'"{text}" is not a valid list: list is empty')
    try:
        return [dtype(t) for t in tokens]
    except ValueError:
        raise ValueError(f'"{text}" is not a valid comma-separated list') from None


def derive_rng(seed: int, *keys: float) -> np.random.Generator:
    """
    Create a random number generator whose stream depends only on the seed and the given keys.

    Real-valued keys are quantized to 1e-6 so that e.g. scan parameters can be used as keys.
    """
    entropy = [int(seed)]
    for k in keys:
        if isinstance(k, (int, np.integer)):
            entropy.append(int(k))
        else:
            entropy.append(int(round(float(k) * 1_000_000)))
    # zigzag mapping: seed sequences only accept non-negative entropy
    return np.random.default_rng([2 * x if x >= 0 else -2 * x - 1 for x in entropy])


def sha256_digest(chunks: Sequence[bytes] | bytes) -> str:
    h = hashlib.sha256()
    if isinstance(chunks, bytes):
        chunks = [chunks]
    for c in chunks:
        h.update(c)
    return h.hexdigest()


def parse_key_value(text: str) -> Dict[str, str]:
    """
    Parse "key = value" lines. Blank lines and lines starting with # are ignored.
    """
    entries = {}
    for i, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if line == "" or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if sep == "" or key == "" or value == "":
            raise ValueError(f'line {i}: expected "key = value", found "{line}"')
        if key in entries:
            raise ValueError(f'line {i}: duplicate key "{key}"')
        entries[key] = value
    return entries
