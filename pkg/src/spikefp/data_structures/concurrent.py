# Copyright (C) 2025 spikefp contributors
#
# SPDX-License-Identifier: MIT

import concurrent.futures
import multiprocessing as mp
import time
from typing import TYPE_CHECKING, Callable, Optional

import structlog

from spikefp.utils import pretty_format_elapsed_time

if TYPE_CHECKING:
    from spikefp.io import ProcessSafeLogger


def _init_worker(log_queue: Optional[mp.Queue]):
    if log_queue is not None:
        from spikefp.io import ProcessSafeLogger

        ProcessSafeLogger.setup_logger(log_queue)


class ProcessPoolWrapper(object):
    """
    Process pool used to spread scan trials over several workers.

    When nproc=1 no pool is created and jobs run in the calling process.
    Workers log through the queue of the main ProcessSafeLogger.
    Should always be used with a context manager (e.g. with:).
    """

    def __init__(
        self,
        nproc: int,
        main_logger: Optional["ProcessSafeLogger"] = None,
        logger=None,
    ):
        if nproc < 1:
            raise ValueError("nproc must be a positive integer")

        self._pool = None
        if nproc == 1:
            return

        t0 = time.time()
        if logger is not None:
            logger.debug("initializing a process pool of size %d", nproc)

        self._pool = concurrent.futures.ProcessPoolExecutor(  # noqa
            max_workers=nproc,
            initializer=_init_worker,
            initargs=(None if main_logger is None else main_logger.log_queue,),
        )

        if logger is not None:
            logger.debug("pool initialization took %s", pretty_format_elapsed_time(t0))

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        if self._pool is None:
            return False

        if exc_type is not None:
            structlog.get_logger().debug("shutting down process pool due to the following exception: %s", exc_val)

        self._pool.shutdown(wait=True, cancel_futures=exc_type is not None)
        self._pool = None
        return False

    @property
    def map(self) -> Callable:
        """
        The map of the process pool, or the built-in map when running in-process.
        Results are returned in submission order.
        """
        if self._pool is None:
            return map
        return self._pool.map
