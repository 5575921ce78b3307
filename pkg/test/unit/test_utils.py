# Copyright (C) 2025 spikefp contributors
#
# SPDX-License-Identifier: MIT

import hashlib

import pytest

from spikefp.utils import (
    derive_rng,
    parse_key_value,
    parse_list,
    pretty_format_count,
    pretty_format_elapsed_time,
    sha256_digest,
)


@pytest.mark.unit
class TestPrettyFormatElapsedTime:
    def test_short_durations(self):
        assert pretty_format_elapsed_time(0, 1.0e-7) == "100ns"
        assert pretty_format_elapsed_time(0, 1.5e-5) == "15.000us"
        assert pretty_format_elapsed_time(0, 0.25) == "250.000ms"
        assert pretty_format_elapsed_time(0, 12.5) == "12.500s"

    def test_long_durations(self):
        assert pretty_format_elapsed_time(0, 62.5) == "1m:2.500s"
        assert pretty_format_elapsed_time(0, 3723.5) == "1h:2m:3.500s"


@pytest.mark.unit
class TestPrettyFormatCount:
    def test_suffixes(self):
        assert pretty_format_count(12) == "12"
        assert pretty_format_count(262144) == "262k"
        assert pretty_format_count(4_800_000) == "4.8M"
        assert pretty_format_count(2.5e9) == "2.5G"


@pytest.mark.unit
class TestParseList:
    def test_floats(self):
        assert parse_list("0.1, 0.2,0.3") == [0.1, 0.2, 0.3]
        assert parse_list("1,2,", dtype=int) == [1, 2]

    def test_invalid(self):
        with pytest.raises(ValueError, match="list is empty"):
            parse_list(" , ")
        with pytest.raises(ValueError, match="not a valid comma-separated list"):
            parse_list("1,a")
        with pytest.raises(ValueError):
            parse_list("1.5", dtype=int)


@pytest.mark.unit
class TestDeriveRng:
    def test_reproducible(self):
        a = derive_rng(42, 3, 0.25).integers(0, 1 << 30, size=8)
        b = derive_rng(42, 3, 0.25).integers(0, 1 << 30, size=8)
        assert a.tolist() == b.tolist()

    def test_keys_matter(self):
        draws = {
            tuple(derive_rng(*keys).integers(0, 1 << 30, size=4).tolist())
            for keys in [(0,), (1,), (0, 1), (0, 2), (0, -1), (0, 0.5), (0, -0.5)]
        }
        assert len(draws) == 7

    def test_negative_seed(self):
        assert derive_rng(-1).random() != derive_rng(1).random()


@pytest.mark.unit
class TestSha256Digest:
    def test_chunks(self):
        expected = hashlib.sha256(b"spikefp").hexdigest()
        assert sha256_digest(b"spikefp") == expected
        assert sha256_digest([b"spike", b"fp"]) == expected


@pytest.mark.unit
class TestParseKeyValue:
    def test_valid(self):
        text = "# comment\n\nfp32_add = 1.30\n  exp=12.8  \n"
        assert parse_key_value(text) == {"fp32_add": "1.30", "exp": "12.8"}

    def test_invalid(self):
        with pytest.raises(ValueError, match='line 2: expected "key = value"'):
            parse_key_value("a = 1\nb\n")
        with pytest.raises(ValueError, match="line 1: expected"):
            parse_key_value("= 1")
        with pytest.raises(ValueError, match='duplicate key "a"'):
            parse_key_value("a = 1\na = 2\n")
