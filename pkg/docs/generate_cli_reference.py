#!/usr/bin/env python3

# Copyright (C) 2025 spikefp contributors
#
# SPDX-License-Identifier: MIT

import argparse
import pathlib
import re
import shutil
import subprocess as sp
import textwrap
from typing import Tuple


def make_cli() -> argparse.ArgumentParser:
    cli = argparse.ArgumentParser()

    def valid_executable(s: str) -> pathlib.Path:
        if shutil.which(s):
            return pathlib.Path(s)

        if s == "spikefp":
            raise argparse.ArgumentTypeError("Unable to find spikefp in your PATH.")

        raise argparse.ArgumentTypeError(f'"{s}" is not a valid executable.')

    cli.add_argument(
        "--spikefp",
        type=valid_executable,
        default=pathlib.Path("spikefp"),
        required=False,
        help="Path to spikefp's executable.",
    )

    return cli


def print_main_header():
    header = """
    ..
      Copyright (C) 2025 spikefp contributors
      SPDX-License-Identifier: MIT

    CLI Reference
    #############

    For an up-to-date list of subcommands and CLI options refer to ``spikefp --help``.

    .. _spikefp_help:

    Subcommands
    -----------

    .. code-block:: text

    """

    print(textwrap.dedent(header))


def print_subcommand_header(subcommand: Tuple[str, ...]):
    name = "spikefp " + " ".join(subcommand)
    bookmark = ".. _" + re.sub(r"\W+", "_", name) + "_help:"
    header = f"""

    {bookmark}

    {name}
    {"-" * len(name)}

    .. code-block:: text
    """

    print(textwrap.dedent(header))


def print_help_msg(spikefp: pathlib.Path, *subcommand: str):
    msg = sp.check_output([spikefp, *subcommand, "--help"]).decode("utf-8")
    msg = msg.replace(str(spikefp), "spikefp")
    msg = re.sub(r"\s+$", "", msg, flags=re.MULTILINE)
    print(textwrap.indent(msg, "  "))


def main():
    spikefp = make_cli().parse_args().spikefp

    print_main_header()
    print_help_msg(spikefp)

    for subcommand in (("encode",), ("verify",), ("scan",), ("energy",)):
        print_subcommand_header(subcommand)
        print_help_msg(spikefp, *subcommand)


if __name__ == "__main__":
    main()
