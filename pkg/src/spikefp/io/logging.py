# Copyright (C) 2025 spikefp contributors
#
# SPDX-License-Identifier: MIT

import collections.abc
import contextlib
import functools
import importlib.metadata
import importlib.util
import multiprocessing as mp
import pathlib
import platform
import sys
from typing import Dict, List, Optional

import structlog

from spikefp.io import get_stderr, initialize_progress_bar


class _ProgressBarProxy(object):
    """
    Forward progress bar events from any process to the listener owning the progress bar.
    """

    def __init__(self, event_queue: mp.Queue):
        self._queue = event_queue

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        return False

    def add_task(self, *args, **kwargs):
        assert "task_id" in kwargs
        kwargs["__event_type"] = "progress_bar_add_task"
        kwargs["args"] = args
        self._queue.put(kwargs)

    def update(self, *args, **kwargs):
        assert "task_id" in kwargs
        kwargs["__event_type"] = "progress_bar_update"
        kwargs["args"] = args
        self._queue.put(kwargs)


@functools.cache
def _map_log_level_to_levelno(level: str) -> int:
    levels = {
        "critical": 50,
        "error": 40,
        "warning": 30,
        "info": 20,
        "debug": 10,
        "notset": 0,
    }

    return levels.get(level.lower(), 0)


class _TeeWriter(object):
    """
    Write each message to the console and to a file.
    A None handle discards the messages meant for it.
    """

    def __init__(self, console, file):
        self._console = console
        self._file = file
        self._rich = hasattr(console, "out")

    def write(self, file_message: Optional[str], console_message: Optional[str]):
        if self._console is not None and console_message is not None:
            if self._rich:
                self._console.out(console_message, style=None, highlight=False)
            else:
                print(console_message, file=self._console)
        if self._file is not None and file_message is not None:
            print(file_message, file=self._file)

    def flush(self):
        if self._file is not None:
            self._file.flush()
        if hasattr(self._console, "flush"):
            self._console.flush()


class _TeeLogger(object):
    """
    Logger class suitable to be returned by structlog logger factories.
    """

    def __init__(self, console, file):
        self._writer = _TeeWriter(console, file)

    def msg(self, file_message: Optional[str] = None, console_message: Optional[str] = None):
        self._writer.write(file_message, console_message)

    log = debug = info = warn = warning = msg
    fatal = failure = err = error = critical = exception = msg


class _NullLogger(object):
    """
    A logger class that ignores all received messages.
    """

    def msg(self, *args, **kwargs):
        pass

    log = debug = info = warn = warning = msg
    fatal = failure = err = error = critical = exception = msg


class _Styles(object):
    """
    Escape sequences used to style each log column.
    All styles are empty when colors are disabled or colorama is not available.
    """

    def __init__(self, colors: bool):
        def color(key: str) -> str:
            if not colors:
                return ""
            try:
                import colorama

                return eval(f"colorama.{key}")
            except ImportError:
                return ""

        self.reset = color("Style.RESET_ALL")
        self.bright = color("Style.BRIGHT")
        self.dim = color("Style.DIM")

        self.timestamp = self.dim
        self.target = color("Fore.BLUE")
        self.location = color("Fore.BLUE")
        self.step = color("Fore.BLUE")


def _configure_logger_columns(
    colors: bool,
    event_key: str = "event",
    timestamp_key: str = "timestamp",
    longest_target_name: str = "fp32_add",
    max_step_nest_levels: int = 2,
) -> List[structlog.dev.Column]:
    """
    Configure the columns used by structlog.dev.ConsoleRenderer to render log messages.

    Log entries look something like this:
    2025-01-24 16:55:32.910578 [info     ] [xor     ] [scan    ] accuracy 98.400%
    """
    if colors and (importlib.util.find_spec("colorama") is None or not sys.stderr.isatty()):
        colors = False

    level_to_color = structlog.dev.ConsoleRenderer().get_default_level_styles(colors)
    if not colors:
        level_to_color = {lvl: "" for lvl in level_to_color}

    if colors and platform.system() == "Windows":
        # colorama must only be initialized on Windows
        import colorama

        colorama.init()

    styles = _Styles(colors)
    pad_event = getattr(structlog.dev, "_EVENT_WIDTH", 30)
    pad_target = max(len(longest_target_name), len("main"))
    pad_step = max(len("depth"), len("step ") + 2 * max_step_nest_levels - 1)

    def step_formatter(data) -> str:
        if isinstance(data, str):
            return data
        if isinstance(data, collections.abc.Sequence):
            return f"step {'.'.join(str(x) for x in data)}"
        return f"step {data}"

    def bracketed(key: str, style: str, width: int, value_repr=str) -> structlog.dev.Column:
        return structlog.dev.Column(
            key,
            structlog.dev.KeyValueColumnFormatter(
                key_style=None,
                value_style=style,
                reset_style=styles.reset,
                value_repr=value_repr,
                width=width,
                prefix="[",
                postfix="]",
            ),
        )

    return [
        structlog.dev.Column(
            timestamp_key,
            structlog.dev.KeyValueColumnFormatter(
                key_style=None,
                value_style=styles.timestamp,
                reset_style=styles.reset,
                value_repr=str,
            ),
        ),
        structlog.dev.Column(
            "level",
            structlog.dev.LogLevelColumnFormatter(
                level_to_color,  # noqa
                reset_style=styles.reset,
            ),
        ),
        bracketed("target", styles.target, pad_target),
        bracketed("step", styles.step, pad_step, step_formatter),
        bracketed("op", styles.target, 0),
        bracketed("location", styles.location, 2),
        structlog.dev.Column(
            event_key,
            structlog.dev.KeyValueColumnFormatter(
                key_style=None,
                value_style=styles.bright,
                reset_style=styles.reset,
                value_repr=str,
                width=pad_event,
            ),
        ),
        structlog.dev.Column(
            "",
            structlog.dev.KeyValueColumnFormatter(
                key_style=None,
                value_style=styles.dim,
                reset_style=styles.reset,
                value_repr=str,
            ),
        ),
    ]


def _warning_handler(message, category, filename, lineno, file=None, line=None):
    from warnings import formatwarning

    structlog.get_logger().warning(
        "\n%s",
        formatwarning(
            message=message,
            category=category,
            filename=filename,
            lineno=lineno,
            line=line,
        ).strip(),
    )


def _install_custom_warning_handler():
    """
    Override the function used to print Python warnings such that warnings are sent to the logger.
    """
    import warnings

    warnings.showwarning = _warning_handler


class ProcessSafeLogger(object):
    """
    A process-safe logger writing messages to stderr and optionally to a file.
    IMPORTANT: this class should only be used from a context manager (e.g. with:).

    The __enter__ method creates the log file (when requested) and spawns a listener process that
    receives event_dicts through a queue, formats them and writes them to the console and the log file.
    The listener also owns the progress bar, which other processes drive through the progress_bar proxy.
    The __exit__ method stops the listener and finalizes the log file.

    Every process other than the one that created the logger must call setup_logger(log_queue)
    before logging anything.
    """

    def __init__(
        self,
        level: str,
        path: Optional[pathlib.Path],
        progress_bar_type: str = "",
        force: bool = False,
        longest_target_name: str = "",
        print_welcome_message: bool = True,
    ):
        """
        Parameters
        ----------
        level
            level used to filter messages printed to the console (does not affect entries written to the log file)
        path
            path where to write the log file
        progress_bar_type
            the kind of progress bar to show ("scan" or "" for none)
        force
            when True, overwrite existing files (if any)
        longest_target_name
            the longest value of the "target" key. Used to align the target column.
        print_welcome_message
            print the spikefp version as soon as the logger is ready
        """
        self._level = level
        self._path = None if path is None else pathlib.Path(path)
        self._progress_bar_type = progress_bar_type
        self._force = force
        self._longest_target_name = longest_target_name
        self._print_welcome_message = print_welcome_message
        self._queue = None
        self._listener = None

        self._object_owned_by_a_context_manager = False

    def __enter__(self):
        self._object_owned_by_a_context_manager = True
        if self._path is not None and self._path.exists() and not self._force:
            raise FileExistsError(f'Refusing to overwrite existing log file "{self._path}". Pass --force to overwrite.')

        self._queue = mp.Manager().Queue(64 * 1024)
        self._listener = mp.Process(
            target=ProcessSafeLogger._listener,
            args=(
                self._path,
                self._level,
                "DEBUG",
                self._longest_target_name,
                self._queue,
                self._print_welcome_message,
                self._progress_bar_type,
            ),
        )
        self._listener.start()

        self.setup_logger(self._queue)

        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        self._object_owned_by_a_context_manager = False
        if self._listener is not None:
            self._queue.put(None)
            self._listener.join()
            if self._path is not None:
                with self._path.open("a") as f:
                    f.write("### END OF LOG ###\n")
        return False

    @property
    def log_queue(self) -> Optional[mp.Queue]:
        assert self._object_owned_by_a_context_manager
        return self._queue

    @property
    def progress_bar(self) -> _ProgressBarProxy:
        return _ProgressBarProxy(self._queue)

    @staticmethod
    def setup_logger(queue: mp.Queue):
        """
        Set up the logger for the current process such that log messages are placed on the log queue.
        """
        structlog.configure(
            cache_logger_on_first_use=True,
            processors=[
                structlog.processors.TimeStamper(fmt="%Y-%m-%d %H:%M:%S.%f"),
                structlog.processors.add_log_level,
                functools.partial(ProcessSafeLogger._enqueue, queue=queue),
            ],
            wrapper_class=None,
            logger_factory=_NullLogger,
        )

        proc = mp.current_process()
        structlog.get_logger().debug("successfully initialized logger in %s with PID=%d", proc.name, proc.pid)

        _install_custom_warning_handler()

    @staticmethod
    def _enqueue(_, method_name, event_dict, queue: mp.Queue) -> str:
        event_dict["__event_type"] = "log_message"
        queue.put(event_dict)
        return ""

    @staticmethod
    def _listener(
        path: Optional[pathlib.Path],
        log_level_console: str,
        log_level_file: str,
        longest_target_name: str,
        queue: mp.Queue,
        print_welcome_message: bool,
        progress_bar_type: str,
    ):
        proc = mp.current_process()
        with contextlib.ExitStack() as ctx:
            error = None
            log_file = None
            if path is not None:
                try:
                    path.parent.mkdir(parents=True, exist_ok=True)
                    path.unlink(missing_ok=True)
                    log_file = ctx.enter_context(path.open("x", encoding="utf-8", buffering=1))
                except Exception:  # noqa
                    import traceback

                    error = traceback.format_exc()

            ProcessSafeLogger._setup_logger_for_listener(
                log_level_console,
                log_level_file,
                console_handle=get_stderr(),
                file_handle=log_file,
                longest_target_name=longest_target_name,
            )
            logger = structlog.get_logger().bind()

            if print_welcome_message:
                logger.info("running spikefp v%s", importlib.metadata.version("spikefp"))

            if error is not None:
                logger.warning('failed to initialize log file "%s" for writing:\n%s', path, error)
            elif path is not None:
                logger.debug('%s (PID=%d) successfully initialized log file "%s"', proc.name, proc.pid, path)

            progress_bar = ctx.enter_context(
                initialize_progress_bar(progress_bar_type, longest_target_name=longest_target_name)
            )
            progress_bar_tasks = {}

            while True:
                event_dict = queue.get()
                if event_dict is None:
                    logger.debug("%s (PID=%d): processed all log messages: returning!", proc.name, proc.pid)
                    return

                event_type = event_dict.pop("__event_type")
                if event_type == "log_message":
                    event_dict["level"] = _map_log_level_to_levelno(event_dict.pop("level", "notset"))
                    logger.log(**event_dict)
                elif event_type == "progress_bar_update":
                    task_id = progress_bar_tasks[event_dict.pop("task_id")]
                    args = event_dict.pop("args", [])
                    progress_bar.update(*args, task_id=task_id, **event_dict)
                elif event_type == "progress_bar_add_task":
                    task_id = event_dict.pop("task_id")
                    args = event_dict.pop("args", [])
                    progress_bar_tasks[task_id] = progress_bar.add_task(*args, **event_dict)
                else:
                    raise NotImplementedError

    @staticmethod
    def _setup_logger_for_listener(
        log_level_console: str,
        log_level_file: str,
        console_handle,
        file_handle,
        longest_target_name: str,
    ):
        def maybe_add_log_level(logger, method_name: str, event_dict):
            if "level" in event_dict:
                return event_dict
            return structlog.processors.add_log_level(logger, method_name, event_dict)

        plain_renderer = structlog.dev.ConsoleRenderer(
            columns=_configure_logger_columns(colors=False, longest_target_name=longest_target_name),
        )
        colored_renderer = None
        if console_handle is not None:
            colored_renderer = structlog.dev.ConsoleRenderer(
                columns=_configure_logger_columns(colors=True, longest_target_name=longest_target_name),
            )

        console_levelno = _map_log_level_to_levelno(log_level_console)
        file_levelno = _map_log_level_to_levelno(log_level_file)

        def renderer(logger, name: str, event_dict) -> Dict[str, Optional[str]]:
            file_message = None
            console_message = None
            levelno = _map_log_level_to_levelno(event_dict["level"])

            if file_levelno <= levelno:
                file_message = plain_renderer(logger, name, event_dict.copy())

            if console_levelno <= levelno:
                if colored_renderer is not None:
                    console_message = colored_renderer(logger, name, event_dict)
                elif file_message is None:
                    console_message = plain_renderer(logger, name, event_dict)
                else:
                    console_message = file_message

            return {"file_message": file_message, "console_message": console_message}

        structlog.configure(
            cache_logger_on_first_use=True,
            wrapper_class=structlog.make_filtering_bound_logger(0),
            processors=[
                structlog.processors.MaybeTimeStamper(fmt="%Y-%m-%d %H:%M:%S.%f"),
                maybe_add_log_level,
                structlog.processors.StackInfoRenderer(),
                renderer,
            ],
            logger_factory=lambda *args: _TeeLogger(console_handle, file_handle),
        )
