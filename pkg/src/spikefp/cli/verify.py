# Copyright (C) 2025 spikefp contributors
#
# SPDX-License-Identifier: MIT

import pathlib
import time
from typing import Optional

import pandas as pd
import structlog

from spikefp.algorithms.fidelity import evaluate_operator, get_operator
from spikefp.cli import telemetry
from spikefp.data_structures import PrecisionFormat, UlpReport
from spikefp.io import format_table, make_manifest, write_table
from spikefp.utils import pretty_format_elapsed_time

VERIFY_COLUMNS = [
    "op",
    "format",
    "reference",
    "div_correction",
    "seed",
    "budget",
    "max_ulp",
    "mean_ulp",
    "zero_ulp_rate",
    "max_abs_err",
    "sample_count",
    "nan_mismatches",
    "within_budget",
]


def _report_table(
    op: str,
    fmt: PrecisionFormat,
    reference: str,
    div_correction: bool,
    seed: int,
    budget: Optional[int],
    report: UlpReport,
) -> pd.DataFrame:
    row = {
        "op": op,
        "format": fmt.value,
        "reference": reference,
        "div_correction": div_correction,
        "seed": seed,
        "budget": budget,
        **report.to_dict(),
        "within_budget": budget is None or report.within(budget),
    }
    return pd.DataFrame([row], columns=VERIFY_COLUMNS)


def run(
    op: str,
    format: str,
    samples: int,
    reference: str,
    no_div_correction: bool,
    seed: int,
    json: bool,
    force: bool,
    output: Optional[pathlib.Path] = None,
    log_file=None,
    main_logger=None,
    telem_span=None,
) -> int:
    """
    Entrypoint for spikefp verify

    Returns 0 when the maximum ULP distance is within the budget declared by the operator, 1 otherwise.
    """
    t0 = time.time()
    div_correction = not no_div_correction
    telemetry.set_params(
        telem_span, op=op, format=format, samples=samples, reference=reference, div_correction=div_correction
    )

    logger = structlog.get_logger().bind(step="verify", target=op)
    operator = get_operator(op)
    fmt = PrecisionFormat.from_name(format)
    budget = operator.ulp_budget(reference, div_correction)

    logger.info("comparing %d sample(s) against the %s reference", samples, reference)
    report = evaluate_operator(
        operator,
        samples=samples,
        seed=seed,
        fmt=fmt,
        reference_name=reference,
        div_correction=div_correction,
    )
    logger.info(
        "max ULP: %d, mean ULP: %.4f, 0-ULP rate: %.2f%% (%s)",
        report.max_ulp,
        report.mean_ulp,
        100 * report.zero_ulp_rate,
        pretty_format_elapsed_time(t0),
    )

    df = _report_table(op, fmt, reference, div_correction, seed, budget, report)
    manifest = make_manifest(
        f"spikefp verify --op {op}",
        seed,
        {
            "op": op,
            "format": fmt.value,
            "samples": samples,
            "reference": reference,
            "div_correction": div_correction,
        },
    )
    if output is None:
        print(format_table(df, manifest, as_json=json), end="")
    else:
        write_table(df, output, manifest, force=force, as_json=json)

    if budget is None:
        logger.info("no ULP budget is declared for %s against the %s reference", op, reference)
        return 0

    if not report.within(budget):
        logger.error("max ULP %d exceeds the budget of %d ULP", report.max_ulp, budget)
        return 1

    return 0
