# Copyright (C) 2025 spikefp contributors
#
# SPDX-License-Identifier: MIT

import pathlib
import time
from typing import List, Optional

import structlog

from spikefp.algorithms.energy import COMPONENTS, emit_component_table, load_baseline
from spikefp.cli import telemetry
from spikefp.cli.setup import UsageError
from spikefp.io import format_table, make_manifest, write_table
from spikefp.utils import pretty_format_elapsed_time, sha256_digest


def run(
    mode: str,
    evaluations: int,
    seed: int,
    json: bool,
    force: bool,
    components: Optional[List[str]] = None,
    baseline: Optional[pathlib.Path] = None,
    output: Optional[pathlib.Path] = None,
    log_file=None,
    main_logger=None,
    telem_span=None,
) -> int:
    """
    Entrypoint for spikefp energy
    """
    t0 = time.time()
    telemetry.set_params(telem_span, mode=mode, evaluations=evaluations, custom_baseline=baseline is not None)
    logger = structlog.get_logger().bind(step="energy")

    if components is not None and components != ["all"]:
        unknown = [c for c in components if c not in COMPONENTS]
        if len(unknown) != 0:
            raise UsageError(f'unknown component(s) {", ".join(unknown)}: choose from {", ".join(COMPONENTS)}')
    else:
        components = list(COMPONENTS)

    if baseline is not None:
        try:
            load_baseline(baseline)
        except ValueError as e:
            raise UsageError(f'invalid baseline file "{baseline}": {e}') from e

    logger.info("tabulating %d component(s) (%s spikes)", len(components), mode)
    df = emit_component_table(
        mode=mode,
        components=components,
        evaluations=evaluations,
        seed=seed,
        baseline_path=baseline,
    )

    params = {"mode": mode, "components": components, "evaluations": evaluations}
    if baseline is not None:
        params["baseline"] = sha256_digest(pathlib.Path(baseline).read_bytes())
    manifest = make_manifest(f"spikefp energy --mode {mode}", seed, params)

    if output is None:
        print(format_table(df, manifest, as_json=json), end="")
    else:
        write_table(df, output, manifest, force=force, as_json=json)

    logger.info("energy table took %s", pretty_format_elapsed_time(t0))
    return 0
