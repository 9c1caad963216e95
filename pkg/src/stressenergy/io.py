"""Snapshot, CSV and JSON output.

Field snapshots are a flat little-endian binary file plus a JSON sidecar:

    offset  type          content
    0       8 bytes       magic b"SEFIELD\\0"
    8       uint32        format version (1)
    12      uint32        dim
    16      uint32        components per node
    20      uint32        kind: 0 vector field, 1 symmetric tensor (upper triangle)
    24      dim x uint64  nodes per axis
    ...     dim x float64 origin
    ...     dim x float64 spacing
    ...     float64       node values, C order (axis 0 slowest), components last

Tensor snapshots store the n(n+1)/2 upper-triangle entries (0,0), (0,1), ...,
(n-1,n-1) per node; the sidecar lists them under ``storage``.
"""
from __future__ import annotations

import csv
import hashlib
import io as _io
import json
import os
import struct
import tempfile
from pathlib import Path
from typing import Mapping

import numpy as np

from .errors import DomainError, ShapeError
from .grid import Grid, GridField
from .tensor import TensorField

MAGIC = b"SEFIELD\x00"
VERSION = 1
KIND_VECTOR = 0
KIND_TENSOR = 1


def atomic_write(path, data: bytes | str) -> Path:
    """Write to a temporary file in the target directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, mode, **({} if mode == "wb" else {"encoding": "utf-8", "newline": ""})) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _jsonable(obj):
    if isinstance(obj, Mapping):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if np.isnan(v):
            return "nan"
        if np.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def dumps_json(obj) -> str:
    return json.dumps(_jsonable(obj), sort_keys=True, indent=2) + "\n"


def write_json(path, obj) -> Path:
    return atomic_write(path, dumps_json(obj))


def config_hash(config: Mapping) -> str:
    """sha256 of the canonical JSON form of a parsed config."""
    canon = json.dumps(_jsonable(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def write_csv(path, columns: Mapping[str, np.ndarray]) -> Path:
    """Columns of equal length to a UTF-8 CSV with a header row."""
    names = list(columns)
    cols = [np.asarray(columns[n]).ravel() for n in names]
    if len({c.size for c in cols}) > 1:
        raise ShapeError("CSV columns differ in length")
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(names)
    for row in zip(*cols):
        w.writerow([_fmt(v) for v in row])
    return atomic_write(path, buf.getvalue())


def write_rows(path, rows: list[Mapping]) -> Path:
    if not rows:
        return atomic_write(path, "")
    names = list(rows[0])
    return write_csv(path, {n: np.array([r[n] for r in rows], dtype=object) for n in names})


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def read_csv(path) -> dict[str, list[str]]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    return {name: [r[k] for r in body] for k, name in enumerate(header)}


# --------------------------------------------------------------------------
# field snapshots


def _pack(grid: Grid, data: np.ndarray, kind: int) -> bytes:
    nodes = data.shape[: grid.dim]
    comps = data.shape[grid.dim]
    head = MAGIC + struct.pack("<IIII", VERSION, grid.dim, comps, kind)
    head += struct.pack(f"<{grid.dim}Q", *nodes)
    head += struct.pack(f"<{grid.dim}d", *grid.origin)
    head += struct.pack(f"<{grid.dim}d", *grid.spacing)
    return head + np.ascontiguousarray(data, dtype="<f8").tobytes()


def _sidecar(grid: Grid, boundary: str, comps: int, kind: int, extra) -> dict:
    meta = {
        "format": "stressenergy-field",
        "version": VERSION,
        "kind": "vector" if kind == KIND_VECTOR else "tensor-sym-upper",
        "dim": grid.dim,
        "extents": list(grid.extents),
        "nodes": list(grid.node_shape(boundary)),
        "origin": list(grid.origin),
        "spacing": list(grid.spacing),
        "boundary": boundary,
        "components": comps,
        "dtype": "float64",
        "byte_order": "little",
        "layout": "C order, axis 0 slowest, components last",
    }
    if extra:
        meta["metadata"] = dict(extra)
    return meta


def _stem(path) -> Path:
    path = Path(path)
    return path.with_suffix("") if path.suffix in (".bin", ".json") else path


def write_field(path, f: GridField, metadata: Mapping | None = None) -> tuple[Path, Path]:
    """Write ``<stem>.bin`` and ``<stem>.json`` for a vector field."""
    stem = _stem(path)
    b = atomic_write(stem.with_suffix(".bin"), _pack(f.grid, f.values, KIND_VECTOR))
    j = write_json(stem.with_suffix(".json"), _sidecar(f.grid, f.boundary, f.dim_u, KIND_VECTOR, metadata))
    return b, j


def write_tensor(path, t: TensorField, metadata: Mapping | None = None) -> tuple[Path, Path]:
    n = t.grid.dim
    iu = np.triu_indices(n)
    data = t.values[..., iu[0], iu[1]]
    stem = _stem(path)
    meta = _sidecar(t.grid, t.boundary, data.shape[-1], KIND_TENSOR, metadata)
    meta["storage"] = [[int(i), int(j)] for i, j in zip(*iu)]
    meta["eps"] = t.eps
    b = atomic_write(stem.with_suffix(".bin"), _pack(t.grid, data, KIND_TENSOR))
    j = write_json(stem.with_suffix(".json"), meta)
    return b, j


def read_snapshot(path):
    """Read a vector field or tensor snapshot, validating header against sidecar."""
    stem = _stem(path)
    raw = stem.with_suffix(".bin").read_bytes()
    meta = json.loads(stem.with_suffix(".json").read_text(encoding="utf-8"))
    if raw[:8] != MAGIC:
        raise DomainError(f"{stem}.bin is not a field snapshot")
    version, dim, comps, kind = struct.unpack_from("<IIII", raw, 8)
    if version != VERSION:
        raise DomainError(f"unsupported snapshot version {version}")
    off = 24
    nodes = struct.unpack_from(f"<{dim}Q", raw, off)
    off += 8 * dim
    origin = struct.unpack_from(f"<{dim}d", raw, off)
    off += 8 * dim
    spacing = struct.unpack_from(f"<{dim}d", raw, off)
    off += 8 * dim
    boundary = meta.get("boundary", "dirichlet")
    if list(nodes) != meta["nodes"] or comps != meta["components"] or dim != meta["dim"]:
        raise DomainError("snapshot header and sidecar disagree")
    expected = int(np.prod(nodes)) * comps * 8
    if len(raw) - off != expected:
        raise DomainError(f"snapshot payload has {len(raw) - off} bytes, expected {expected}")
    data = np.frombuffer(raw, dtype="<f8", offset=off).reshape(tuple(nodes) + (comps,)).astype(float)
    extents = tuple(meta["extents"])
    grid = Grid(dim, tuple(origin), tuple(spacing), extents)
    if not np.all(np.isfinite(data)):
        raise DomainError("snapshot contains non-finite values")
    if kind == KIND_VECTOR:
        return GridField(grid, data, boundary)
    full = np.zeros(tuple(nodes) + (dim, dim))
    for k, (i, j) in enumerate(meta["storage"]):
        full[..., i, j] = data[..., k]
        full[..., j, i] = data[..., k]
    return TensorField(grid, full, meta.get("eps"), boundary)


def field_columns(f: GridField) -> dict[str, np.ndarray]:
    """Flat columns (coordinates then components) for CSV export of 1D/2D fields."""
    if f.grid.dim > 2:
        raise ShapeError("CSV export is for 1D and 2D fields or slices")
    x = f.coordinates().reshape(-1, f.grid.dim)
    cols = {f"x{a + 1}": x[:, a] for a in range(f.grid.dim)}
    v = f.values.reshape(-1, f.dim_u)
    cols.update({f"u{c + 1}": v[:, c] for c in range(f.dim_u)})
    return cols


def slice_field(f: GridField, axis: int, index: int) -> GridField:
    """Restrict a field to the grid plane ``x_axis = node index`` (dimension drops by one)."""
    g = f.grid
    keep = [a for a in range(g.dim) if a != axis]
    sub = Grid(len(keep), tuple(g.origin[a] for a in keep), tuple(g.spacing[a] for a in keep),
               tuple(g.extents[a] for a in keep))
    return GridField(sub, np.take(f.values, index, axis=axis), f.boundary)
