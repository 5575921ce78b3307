# Copyright (C) 2025 spikefp contributors
#
# SPDX-License-Identifier: MIT

import io
import pathlib
from typing import Dict, Tuple

import pandas as pd


def spikefp_main(args) -> int:
    from spikefp.main import main

    return main(args, no_telemetry=True)


def parse_csv_output(text: str) -> Tuple[Dict[str, str], pd.DataFrame]:
    """
    Split the output of a subcommand into its manifest and its table.
    """
    manifest = {}
    lines = text.splitlines(keepends=True)
    i = 0
    while i < len(lines) and lines[i].startswith("#"):
        key, _, value = lines[i][1:].strip().partition(":")
        manifest[key.strip()] = value.strip()
        i += 1

    return manifest, pd.read_csv(io.StringIO("".join(lines[i:])))


def write_text(path: pathlib.Path, text: str) -> pathlib.Path:
    path = pathlib.Path(path)
    path.write_text(text)
    return path
