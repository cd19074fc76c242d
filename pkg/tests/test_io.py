import io as _io
import struct

import numpy as np
import pytest

from helicity_lab import io as hio
from helicity_lab.lattice import TorusGrid, random_field
from helicity_lab.yangmills.sgrid import HalfSpaceField, SGrid


class TestContainer:
    def test_real_roundtrip(self, tmp_path, grid8, rng):
        f = random_field(grid8, rng)
        hio.write_field(tmp_path / "f.bin", f, grid8)
        back, g, sg = hio.read_field(tmp_path / "f.bin")
        assert g == grid8 and sg is None
        np.testing.assert_array_equal(back, f)

    def test_complex_scalar_roundtrip(self, tmp_path, grid8, rng):
        f = rng.standard_normal(grid8.shape) + 1j * rng.standard_normal(grid8.shape)
        hio.write_field(tmp_path / "c.bin", f, grid8)
        back, _, _ = hio.read_field(tmp_path / "c.bin")
        assert back.dtype == np.complex128
        np.testing.assert_array_equal(back, f)

    @pytest.mark.parametrize("rule", ["spectral", "fd"])
    def test_stack_roundtrip(self, tmp_path, rng, rule):
        g = TorusGrid(4, 3.0)
        sg = getattr(SGrid, rule)(6, 5.0, 2.5)
        st = HalfSpaceField(rng.standard_normal((7, 3, 3) + g.shape), sg, g)
        hio.save_stack(tmp_path / "s.bin", st)
        back = hio.load_stack(tmp_path / "s.bin")
        np.testing.assert_array_equal(back.layers, st.layers)
        np.testing.assert_array_equal(back.sgrid.s, sg.s)
        assert back.sgrid.rule == rule and back.sgrid.beta == 2.5

    def test_header_layout(self, tmp_path, grid8):
        hio.write_field(tmp_path / "f.bin", np.zeros((3,) + grid8.shape), grid8)
        raw = (tmp_path / "f.bin").read_bytes()
        assert raw[:4] == b"HLXF"
        version, n, L, code, rank, shape0, count, has_s = struct.unpack("<IIdIIIII", raw[4:40])
        assert (version, n, code, rank, shape0, count, has_s) == (1, 8, 0, 1, 3, 3, 0)
        assert L == pytest.approx(grid8.L)
        assert len(raw) == 40 + 8 * 3 * 8**3

    def test_rejects_foreign_file(self, tmp_path):
        (tmp_path / "x.bin").write_bytes(b"NOPE" + bytes(40))
        with pytest.raises(hio.ContainerError):
            hio.read_field(tmp_path / "x.bin")

    def test_rejects_truncation(self, tmp_path, grid8):
        hio.write_field(tmp_path / "f.bin", np.zeros((3,) + grid8.shape), grid8)
        raw = (tmp_path / "f.bin").read_bytes()
        (tmp_path / "t.bin").write_bytes(raw[:-8])
        with pytest.raises(hio.ContainerError):
            hio.read_field(tmp_path / "t.bin")
        (tmp_path / "h.bin").write_bytes(raw[:12])
        with pytest.raises(hio.ContainerError):
            hio.read_field(tmp_path / "h.bin")

    def test_rejects_wrong_grid(self, tmp_path, grid8):
        with pytest.raises(hio.ContainerError):
            hio.write_field(tmp_path / "f.bin", np.zeros((3, 4, 4, 4)), grid8)

    def test_stack_needs_s_header(self, tmp_path, grid8):
        hio.write_field(tmp_path / "f.bin", np.zeros((3, 3, 3) + grid8.shape), grid8)
        with pytest.raises(hio.ContainerError):
            hio.load_stack(tmp_path / "f.bin")


class TestText:
    def test_csv_roundtrip(self, tmp_path, rng):
        g = TorusGrid(4, 2.0)
        f = rng.standard_normal((3, 3) + g.shape)
        hio.field_to_csv(tmp_path / "f.csv", f, g)
        np.testing.assert_array_equal(hio.field_from_csv(tmp_path / "f.csv", g, (3, 3)), f)
        header = (tmp_path / "f.csv").read_text().splitlines()[0]
        assert header.startswith("x,y,z,c0_0,c0_1")

    def test_csv_buffer_and_scalar(self, rng):
        g = TorusGrid(4)
        f = rng.standard_normal(g.shape)
        buf = _io.StringIO()
        hio.field_to_csv(buf, f, g)
        buf.seek(0)
        np.testing.assert_array_equal(hio.field_from_csv(buf, g), f)

    def test_csv_limits(self, grid8):
        with pytest.raises(hio.ContainerError):
            hio.field_to_csv(_io.StringIO(), np.zeros(grid8.shape, complex), grid8)
        big = TorusGrid(hio.CSV_GRID_CAP + 2)
        with pytest.raises(hio.ContainerError):
            hio.field_to_csv(_io.StringIO(), np.zeros(big.shape), big)

    def test_json_lines(self, tmp_path):
        recs = [{"iteration": 1, "action": 2.5}, {"iteration": 2, "action": 2.25}]
        hio.write_json_lines(tmp_path / "log.jsonl", recs)
        assert hio.read_json_lines(tmp_path / "log.jsonl") == recs
