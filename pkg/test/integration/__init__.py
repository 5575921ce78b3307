# Copyright (C) 2025 spikefp contributors
#
# SPDX-License-Identifier: MIT
