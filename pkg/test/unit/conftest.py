# Copyright (C) 2025 spikefp contributors
#
# SPDX-License-Identifier: MIT

import pathlib
import sys

sys.path.append(str(pathlib.Path(__file__).parent / "test_helpers"))
