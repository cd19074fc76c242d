"""Serialization of fields and stacks.

Binary container (all little-endian)::

    magic      4 bytes   b"HLXF"
    version    uint32    1
    n          uint32    grid points per side
    L          float64   side length
    dtype      uint32    0 = float64, 1 = complex128
    rank       uint32    number of leading component axes
    shape      rank x uint32
    count      uint32    product of shape (component count)
    has_s      uint32    0 or 1
    [if has_s: rule uint32 (0 spectral, 1 fd), M uint32, beta float64,
               s (M+1) x float64]
    payload    row-major array of shape (shape..., n, n, n)

For stacks the leading axis is the layer index.  CSV export writes one row
per grid point with the coordinates followed by every component.
"""
from __future__ import annotations

import csv
import io
import json
import struct
from pathlib import Path

import numpy as np

from .lattice import TorusGrid
from .yangmills.sgrid import HalfSpaceField, SGrid

MAGIC = b"HLXF"
VERSION = 1
CSV_GRID_CAP = 32
_RULES = {"spectral": 0, "fd": 1}
_DTYPES = {0: np.dtype("<f8"), 1: np.dtype("<c16")}


class ContainerError(ValueError):
    pass


def _write(fh, fmt, *values):
    fh.write(struct.pack("<" + fmt, *values))


def _read(fh, fmt):
    size = struct.calcsize("<" + fmt)
    buf = fh.read(size)
    if len(buf) != size:
        raise ContainerError("truncated header")
    return struct.unpack("<" + fmt, buf)


def write_field(path, field: np.ndarray, grid: TorusGrid, sgrid: SGrid | None = None) -> None:
    field = np.asarray(field)
    if field.shape[-3:] != grid.shape:
        raise ContainerError(f"field shape {field.shape} does not end in {grid.shape}")
    code = 1 if np.iscomplexobj(field) else 0
    lead = field.shape[:-3]
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        _write(fh, "IIdII", VERSION, grid.n, grid.L, code, len(lead))
        if lead:
            _write(fh, f"{len(lead)}I", *lead)
        _write(fh, "I", int(np.prod(lead, dtype=int)))
        if sgrid is None:
            _write(fh, "I", 0)
        else:
            if lead[0] != sgrid.M + 1:
                raise ContainerError("leading axis must match the number of s-layers")
            _write(fh, "IIId", 1, _RULES[sgrid.rule], sgrid.M, sgrid.beta)
            fh.write(np.ascontiguousarray(sgrid.s, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(field, dtype=_DTYPES[code]).tobytes())


def read_field(path) -> tuple[np.ndarray, TorusGrid, SGrid | None]:
    with open(path, "rb") as fh:
        if fh.read(4) != MAGIC:
            raise ContainerError("not a field container")
        version, n, L, code, rank = _read(fh, "IIdII")
        if version != VERSION:
            raise ContainerError(f"unsupported version {version}")
        if code not in _DTYPES:
            raise ContainerError(f"unknown dtype code {code}")
        lead = _read(fh, f"{rank}I") if rank else ()
        (count,) = _read(fh, "I")
        if count != int(np.prod(lead, dtype=int)):
            raise ContainerError("component count does not match shape")
        (has_s,) = _read(fh, "I")
        sgrid = None
        if has_s:
            rule, M, beta = _read(fh, "IId")
            s = np.frombuffer(fh.read(8 * (M + 1)), dtype="<f8")
            if len(s) != M + 1:
                raise ContainerError("truncated s-grid")
            maker = SGrid.spectral if rule == 0 else SGrid.fd
            sgrid = maker(M, float(s[-1]), beta)
            if not np.allclose(sgrid.s, s, rtol=1e-14, atol=0):
                raise ContainerError("s-grid nodes do not match the recorded rule")
        grid = TorusGrid(n, L)
        shape = tuple(lead) + grid.shape
        dt = _DTYPES[code]
        data = np.frombuffer(fh.read(), dtype=dt)
        if data.size != int(np.prod(shape)):
            raise ContainerError(f"payload has {data.size} values, expected {int(np.prod(shape))}")
        return data.reshape(shape).copy(), grid, sgrid


def save_stack(path, a: HalfSpaceField) -> None:
    write_field(path, a.layers, a.grid, a.sgrid)


def load_stack(path) -> HalfSpaceField:
    layers, grid, sgrid = read_field(path)
    if sgrid is None:
        raise ContainerError("container has no s-grid header")
    return HalfSpaceField(layers, sgrid, grid)


def field_to_csv(path_or_buf, field: np.ndarray, grid: TorusGrid) -> None:
    """One row per grid point: x, y, z and the flattened components."""
    if grid.n > CSV_GRID_CAP:
        raise ContainerError(f"CSV export is limited to n <= {CSV_GRID_CAP}")
    field = np.asarray(field)
    if np.iscomplexobj(field):
        raise ContainerError("CSV export takes real fields")
    comps = field.reshape(-1, grid.n**3)
    idx = list(np.ndindex(*field.shape[:-3])) or [()]
    names = ["x", "y", "z"] + ["c" + "_".join(map(str, i)) if i else "c" for i in idx]
    coords = grid.x.reshape(3, -1)
    own = isinstance(path_or_buf, (str, Path))
    fh = open(path_or_buf, "w", newline="") if own else path_or_buf
    try:
        w = csv.writer(fh)
        w.writerow(names)
        for p in range(grid.n**3):
            w.writerow([repr(float(v)) for v in coords[:, p]] + [repr(float(v)) for v in comps[:, p]])
    finally:
        if own:
            fh.close()


def field_from_csv(path_or_buf, grid: TorusGrid, shape: tuple[int, ...] = ()) -> np.ndarray:
    text = Path(path_or_buf).read_text() if isinstance(path_or_buf, (str, Path)) else path_or_buf.read()
    rows = list(csv.reader(io.StringIO(text)))
    data = np.array([[float(v) for v in r[3:]] for r in rows[1:]])
    return data.T.reshape(tuple(shape) + grid.shape)


def write_json_lines(path, records) -> None:
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")


def read_json_lines(path) -> list[dict]:
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]
