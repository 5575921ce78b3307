# Copyright (C) 2025 spikefp contributors
#
# SPDX-License-Identifier: MIT

import pathlib
import time
from typing import Any, Dict, List, Optional, Sequence, Tuple

import pandas as pd
import structlog

from spikefp.algorithms import fidelity, robustness
from spikefp.cli import telemetry
from spikefp.cli.setup import UsageError
from spikefp.data_structures import ProcessPoolWrapper
from spikefp.io import ProcessSafeLogger, format_table, load_block_weights, make_manifest, write_table
from spikefp.utils import pretty_format_elapsed_time

_SCAN_PARAMETER = {
    "beta": "beta",
    "noise": "noise_sigma",
    "threshold": "threshold_delta",
    "fpnoise": "fp_noise",
}


def _expand_targets(kind: str, targets: Sequence[str]) -> List[str]:
    if list(targets) != ["all"]:
        return list(targets)
    if kind == "fpnoise":
        return [f"fp{bits}_{op}" for bits in (8, 16, 32) for op in robustness.FP_OPS]
    return list(robustness.DEFAULT_TARGETS)


def _encoding_job(job: Tuple[str, int, int, int, int]) -> Dict[str, Any]:
    scheme, steps, n, seed, trials = job
    return fidelity.encoding_benchmark(scheme, steps, n, seed, trials)


def _plan_encoding_jobs(schemes: Sequence[str], steps: Sequence[int], n: int, seed: int, trials: int):
    jobs = []
    for scheme in schemes:
        # the spatial scheme always uses every channel
        for s in steps if scheme != "spatial" else steps[:1]:
            jobs.append((scheme, s, n, seed, trials))
    return jobs


def _make_progress_callback(main_logger: Optional[ProcessSafeLogger], kind: str, total: int):
    if main_logger is None:
        return lambda target: None

    progress_bar = main_logger.progress_bar
    progress_bar.add_task(
        task_id="total",
        target="",
        name=f"scan {kind}",
        description="",
        start=True,
        total=total,
        visible=True,
    )

    def factory(target: str):
        return lambda n: progress_bar.update(task_id="total", advance=n, target=target)

    return factory


def _physics_options(params: Dict[str, Any]) -> Dict[str, Any]:
    options = {}
    if params.get("background_sigma") is not None:
        options["background_sigma"] = params["background_sigma"]
    if params.get("worst_case") is not None:
        options["deviation_mode"] = f"worst{params['worst_case']}"
    elif "deviation" in params:
        options["deviation_mode"] = params["deviation"]
    return options


def _run_robustness_scan(
    kind: str,
    targets: Sequence[str],
    params: Dict[str, Any],
    pool: ProcessPoolWrapper,
    main_logger: Optional[ProcessSafeLogger],
) -> pd.DataFrame:
    configs = []
    for target in targets:
        try:
            config = robustness.ScanConfig(
                parameter=_SCAN_PARAMETER[kind],
                values=tuple(params["values"]),
                trials=params["trials"],
                seed=params["seed"],
                target=target,
                repeats=params["repeats"],
                samples=params["samples"],
                **_physics_options(params),
            )
        except ValueError as e:
            raise UsageError(f"invalid {kind} scan: {e}") from e
        configs.append(config)

    progress = _make_progress_callback(main_logger, kind, sum(len(c.values) * c.trials for c in configs))
    return pd.concat(
        [robustness.run_scan(c, pool=pool, progress=progress(c.target)) for c in configs],
        ignore_index=True,
    )


def _run_encoding_scan(params: Dict[str, Any], pool: ProcessPoolWrapper, main_logger) -> pd.DataFrame:
    jobs = _plan_encoding_jobs(
        params["schemes"], params["steps"], params["num_values"], params["seed"], params["trials"]
    )
    progress = _make_progress_callback(main_logger, "encoding", len(jobs))
    rows = []
    for job, row in zip(jobs, pool.map(_encoding_job, jobs)):
        progress(job[0])(1)
        rows.append(row)
    return fidelity.encoding_table(rows)


def _run_depth_scan(params: Dict[str, Any]) -> pd.DataFrame:
    weights = None
    if "weights" in params:
        weights = load_block_weights(params["weights"], fidelity.DEFAULT_DEPTH_CONFIG)

    results = fidelity.depth_scan(
        params["blocks"],
        params["seed"],
        engine=params["engine"],
        weights=weights,
        batch=params["batch"],
    )
    return fidelity.depth_table(results)


def _manifest_params(kind: str, params: Dict[str, Any]) -> Dict[str, Any]:
    excluded = {"output", "force", "log_file", "json", "nproc", "seed"}
    manifest_params = {k: v for k, v in params.items() if k not in excluded}
    if "weights" in manifest_params:
        # the weight file is identified by its content
        manifest_params["weights"] = _weights_digest(manifest_params["weights"])
    manifest_params["kind"] = kind
    return manifest_params


def _weights_digest(path: pathlib.Path) -> str:
    from spikefp.utils import sha256_digest

    return sha256_digest(pathlib.Path(path).read_bytes())


def run(
    kind: str,
    seed: int,
    json: bool,
    force: bool,
    nproc: int,
    output: Optional[pathlib.Path] = None,
    log_file=None,
    main_logger: Optional[ProcessSafeLogger] = None,
    telem_span=None,
    **params,
) -> int:
    """
    Entrypoint for spikefp scan
    """
    t0 = time.time()
    params["seed"] = seed
    telemetry.set_params(telem_span, kind=kind, nproc=nproc, **{k: v for k, v in params.items() if k != "weights"})

    logger = structlog.get_logger().bind(step="scan")
    logger.info("running a %s scan", kind)

    with ProcessPoolWrapper(nproc, main_logger=main_logger, logger=logger) as pool:
        if kind in _SCAN_PARAMETER:
            targets = _expand_targets(kind, params["targets"])
            params["targets"] = targets
            df = _run_robustness_scan(kind, targets, params, pool, main_logger)
        elif kind == "encoding":
            df = _run_encoding_scan(params, pool, main_logger)
        elif kind == "depth":
            df = _run_depth_scan(params)
        else:
            raise NotImplementedError

    manifest = make_manifest(f"spikefp scan {kind}", seed, _manifest_params(kind, params))
    if output is None:
        print(format_table(df, manifest, as_json=json), end="")
    else:
        write_table(df, output, manifest, force=force, as_json=json)

    logger.info("%s scan took %s", kind, pretty_format_elapsed_time(t0))
    return 0
