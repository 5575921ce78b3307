# Copyright (C) 2025 spikefp contributors
#
# SPDX-License-Identifier: MIT

from importlib.metadata import version

__version__ = version("spikefp")
