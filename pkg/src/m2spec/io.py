"""
File formats.

Covariance files are UTF-8 JSON::

    {"format": "m2spec-covariance", "version": 1, "d": 2, "m": 2,
     "index_set": [[-1, -1], ...],
     "values": [{"re": [[...]], "im": [[...]]}, ...],   # aligned with index_set
     "meta": {...}}

Grid density files are binary: the 5 bytes ``MGRD1``, little-endian int64
d, m, N, then N^d * m^2 complex128 samples (interleaved real/imag doubles),
node-major in lexicographic grid order, each matrix row-major.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import DataError
from .grid import CovarianceData, IndexSet, TorusGrid

GRID_MAGIC = b"MGRD1"
COV_FORMAT = "m2spec-covariance"


def _matrix_json(A) -> dict:
    A = np.asarray(A, dtype=complex)
    return {"re": A.real.tolist(), "im": A.imag.tolist()}


def _matrix_from_json(obj) -> np.ndarray:
    return np.asarray(obj["re"], dtype=float) + 1j * np.asarray(obj["im"], dtype=float)


def covariance_to_dict(sigma: CovarianceData, meta: dict | None = None) -> dict:
    return {
        "format": COV_FORMAT,
        "version": 1,
        "d": sigma.index_set.d,
        "m": sigma.m,
        "index_set": sigma.index_set.indices.tolist(),
        "values": [_matrix_json(v) for v in sigma.values],
        "meta": meta or {},
    }


def covariance_from_dict(obj: dict):
    """Inverse of :func:`covariance_to_dict`; returns (CovarianceData, meta)."""
    try:
        if obj.get("format") != COV_FORMAT:
            raise DataError(f"not a covariance file (format={obj.get('format')!r})")
        ix = IndexSet(obj["index_set"])
        vals = np.stack([_matrix_from_json(v) for v in obj["values"]])
        if ix.d != obj["d"] or vals.shape[1:] != (obj["m"], obj["m"]):
            raise DataError("header d/m disagree with the stored arrays")
        return CovarianceData(ix, vals), obj.get("meta", {})
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, DataError):
            raise
        raise DataError(f"malformed covariance file: {exc}") from None


def write_covariance(path, sigma: CovarianceData, meta: dict | None = None) -> None:
    text = json.dumps(covariance_to_dict(sigma, meta), indent=1)
    Path(path).write_text(text + "\n", encoding="utf-8")


def read_covariance(path):
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON ({exc})") from None
    return covariance_from_dict(obj)


def write_grid(path, grid: TorusGrid, samples) -> None:
    S = np.asarray(samples, dtype=complex)
    m = S.shape[-1]
    if S.shape != (grid.n_nodes, m, m):
        raise DataError(f"samples shape {S.shape} does not match grid with {grid.n_nodes} nodes")
    with open(path, "wb") as fh:
        fh.write(GRID_MAGIC)
        fh.write(struct.pack("<qqq", grid.d, m, grid.N))
        fh.write(S.astype("<c16").tobytes(order="C"))


def read_grid(path):
    """Returns (TorusGrid, samples of shape (n_nodes, m, m))."""
    raw = Path(path).read_bytes()
    if raw[:5] != GRID_MAGIC or len(raw) < 29:
        raise DataError(f"{path}: not an MGRD1 grid file")
    d, m, N = struct.unpack("<qqq", raw[5:29])
    if d < 1 or m < 1 or N < 1:
        raise DataError(f"{path}: bad header d={d} m={m} N={N}")
    grid = TorusGrid(d, N)
    expected = grid.n_nodes * m * m * 16
    if len(raw) - 29 != expected:
        raise DataError(f"{path}: expected {expected} payload bytes, found {len(raw) - 29}")
    S = np.frombuffer(raw, dtype="<c16", offset=29).reshape(grid.n_nodes, m, m)
    return grid, S.astype(complex)


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=1) + "\n", encoding="utf-8")
