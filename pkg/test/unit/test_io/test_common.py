# Copyright (C) 2025 spikefp contributors
#
# SPDX-License-Identifier: MIT

import json
import pathlib

import numpy as np
import pandas as pd
import pytest

from spikefp.algorithms.encoding import encode
from spikefp.data_structures import (
    BitPlaneTensor,
    BlockWeights,
    PrecisionFormat,
    RunManifest,
    TransformerBlockConfig,
)
from spikefp.io import (
    check_output_path,
    format_table,
    load_block_weights,
    parse_values,
    read_bitplanes,
    read_table,
    write_bitplanes,
    write_block_weights,
    write_table,
)

FP8 = PrecisionFormat.FP8_E4M3
FP16 = PrecisionFormat.FP16
FP32 = PrecisionFormat.FP32


def _manifest() -> RunManifest:
    return RunManifest(command="verify", seed=7, config_digest="ab" * 32, tool_version="1.0.0", timestamp="2025-01-01T00:00:00Z")


@pytest.mark.unit
class TestParseValues:
    def test_hex(self):
        p = parse_values("0x3F800000, 0x40000000\n0xBF800000", FP32)
        assert p.dtype == np.uint32
        assert p.tolist() == [0x3F800000, 0x40000000, 0xBF800000]

    def test_comments_and_blank_lines(self):
        p = parse_values("# header\n\n0x3C00 0x0000\n   # indented comment\n", FP16)
        assert p.tolist() == [0x3C00, 0]

    def test_decimal(self):
        p = parse_values("1.0, -2, 0x38", FP8, allow_decimal=True)
        assert p.dtype == np.uint8
        assert p.tolist() == [0x38, 0xC0, 0x38]

    def test_empty(self):
        assert len(parse_values("", FP32)) == 0

    def test_invalid(self):
        with pytest.raises(ValueError, match="Pass --decimal"):
            parse_values("1.0", FP32)
        with pytest.raises(ValueError, match="does not fit in 16 bits"):
            parse_values("0x10000", FP16)
        with pytest.raises(ValueError, match="not a valid number"):
            parse_values("one", FP32, allow_decimal=True)


@pytest.mark.unit
class TestBitPlaneFiles:
    def test_roundtrip(self, tmpdir):
        path = pathlib.Path(tmpdir) / "x.bp"
        t = encode(np.arange(6, dtype=np.float32).reshape(2, 3), FP16)
        write_bitplanes(path, t)
        assert path.read_bytes().startswith(b"SPIKEFP-BP 1 fp16 2x3\n")

        t2 = read_bitplanes(path)
        assert t2.format == FP16
        assert t2.shape == (2, 3)
        assert np.array_equal(t2.patterns(), t.patterns())

    def test_refuses_to_overwrite(self, tmpdir):
        path = pathlib.Path(tmpdir) / "x.bp"
        t = BitPlaneTensor.from_patterns(FP8, np.array([1, 2, 3], dtype=np.uint8))
        write_bitplanes(path, t)
        with pytest.raises(FileExistsError):
            write_bitplanes(path, t)
        write_bitplanes(path, t, force=True)

    def test_invalid_files(self, tmpdir):
        tmpdir = pathlib.Path(tmpdir)

        path = tmpdir / "garbage.bp"
        path.write_bytes(b"\x00\x01\x02")
        with pytest.raises(RuntimeError, match="not a valid bit-plane file"):
            read_bitplanes(path)

        path = tmpdir / "version.bp"
        path.write_bytes(b"SPIKEFP-BP 2 fp8 1\n\x00")
        with pytest.raises(RuntimeError, match="unsupported bit-plane file version"):
            read_bitplanes(path)

        path = tmpdir / "truncated.bp"
        path.write_bytes(b"SPIKEFP-BP 1 fp32 4\n\x00\x00")
        with pytest.raises(RuntimeError, match="payload size"):
            read_bitplanes(path)


@pytest.mark.unit
class TestTables:
    def test_csv(self, tmpdir):
        df = pd.DataFrame({"op": ["fp_add", "fp_mul"], "max_ulp": [0, 0]})
        text = format_table(df, _manifest())
        assert text.startswith("# command: verify\n# seed: 7\n")
        assert "op,max_ulp\nfp_add,0\n" in text

        path = pathlib.Path(tmpdir) / "out" / "table.csv"
        write_table(df, path, _manifest())
        manifest, df2 = read_table(path)
        assert manifest["command"] == "verify"
        assert manifest["timestamp"] == "2025-01-01T00:00:00Z"
        assert df2.equals(df)

    def test_json(self, tmpdir):
        df = pd.DataFrame({"component": ["and"], "savings": [np.nan]})
        payload = json.loads(format_table(df, _manifest(), as_json=True))
        assert payload["manifest"]["seed"] == 7
        assert payload["rows"] == [{"component": "and", "savings": None}]

        path = pathlib.Path(tmpdir) / "table.json"
        write_table(df, path, _manifest(), as_json=True)
        manifest, df2 = read_table(path)
        assert manifest["config_digest"] == "ab" * 32
        assert df2["component"].tolist() == ["and"]

    def test_check_output_path(self, tmpdir):
        path = pathlib.Path(tmpdir) / "a" / "b" / "c.csv"
        check_output_path(path, force=False)
        assert path.parent.is_dir()

        path.write_text("")
        with pytest.raises(FileExistsError, match="--force"):
            check_output_path(path, force=False)
        check_output_path(path, force=True)


@pytest.mark.unit
class TestBlockWeights:
    config = TransformerBlockConfig(d_model=4, n_heads=2, d_ff=8, seq_len=2)

    def test_roundtrip(self, tmpdir):
        path = pathlib.Path(tmpdir) / "weights.json"
        rng = np.random.default_rng(0)
        blocks = [BlockWeights.random(self.config, rng) for _ in range(2)]
        write_block_weights(path, blocks)

        loaded = load_block_weights(path, self.config)
        assert len(loaded) == 2
        for a, b in zip(blocks, loaded):
            assert np.array_equal(a.attn_norm.view(np.uint32), b.attn_norm.view(np.uint32))
            assert np.array_equal(a.w_down.w.view(np.uint32), b.w_down.w.view(np.uint32))

    def test_checksum_mismatch(self, tmpdir):
        path = pathlib.Path(tmpdir) / "weights.json"
        write_block_weights(path, [BlockWeights.random(self.config, np.random.default_rng(1))])
        payload = json.loads(path.read_text())
        payload["blocks"][0]["wq"]["values"][0] = "0x3F800000"
        path.write_text(json.dumps(payload))

        with pytest.raises(RuntimeError, match="checksum mismatch"):
            load_block_weights(path)

    def test_shape_mismatch(self, tmpdir):
        path = pathlib.Path(tmpdir) / "weights.json"
        write_block_weights(path, [BlockWeights.random(self.config, np.random.default_rng(2))])
        other = TransformerBlockConfig(d_model=4, n_heads=2, d_ff=16, seq_len=2)
        with pytest.raises(RuntimeError, match="w_up has shape"):
            load_block_weights(path, other)

    def test_invalid_files(self, tmpdir):
        path = pathlib.Path(tmpdir) / "weights.json"
        path.write_text("not json")
        with pytest.raises(RuntimeError, match="not a valid weight file"):
            load_block_weights(path)

        path.write_text(json.dumps({"blocks": [{"attn_norm": {"shape": [1], "values": ["0x0"], "sha256": ""}}]}))
        with pytest.raises(RuntimeError):
            load_block_weights(path)
