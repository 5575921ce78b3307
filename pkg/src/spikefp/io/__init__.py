# Copyright (C) 2025 spikefp contributors
#
# SPDX-License-Identifier: MIT

from .common import (  # isort:skip
    check_output_path,
    format_table,
    get_stderr,
    load_block_weights,
    make_manifest,
    parse_values,
    read_bitplanes,
    read_table,
    write_bitplanes,
    write_block_weights,
    write_table,
)
from .progress_bar import initialize_progress_bar  # isort:skip
from .logging import ProcessSafeLogger
