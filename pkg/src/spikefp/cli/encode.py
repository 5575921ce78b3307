# Copyright (C) 2025 spikefp contributors
#
# SPDX-License-Identifier: MIT

import pathlib
import time

import structlog

from spikefp.cli import telemetry
from spikefp.cli.setup import UsageError
from spikefp.data_structures import BitPlaneTensor, PrecisionFormat
from spikefp.io import parse_values, write_bitplanes
from spikefp.utils import pretty_format_elapsed_time


def run(
    input_file: pathlib.Path,
    output_file: pathlib.Path,
    format: str,
    decimal: bool,
    force: bool,
    log_file=None,
    main_logger=None,
    telem_span=None,
) -> int:
    """
    Entrypoint for spikefp encode
    """
    t0 = time.time()
    telemetry.set_params(telem_span, format=format, decimal=decimal)
    logger = structlog.get_logger().bind(step="encode")

    fmt = PrecisionFormat.from_name(format)
    try:
        patterns = parse_values(pathlib.Path(input_file).read_text(), fmt, allow_decimal=decimal)
    except (UnicodeDecodeError, ValueError) as e:
        raise UsageError(f'failed to parse "{input_file}": {e}') from e

    logger.info("encoding %d %s value(s) into %d bit-planes", len(patterns), fmt.name, fmt.bit_width)
    write_bitplanes(output_file, BitPlaneTensor.from_patterns(fmt, patterns), force=force)
    logger.info('written bit-plane file "%s" in %s', output_file, pretty_format_elapsed_time(t0))

    return 0
