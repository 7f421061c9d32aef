"""Binary field snapshots.

Format: one line of JSON ``{dim, n, L, components, time, name}`` terminated
by a newline, followed by raw little-endian 64-bit floats in C (row-major)
order over ``(component, x1, x2[, x3])``. Scalar fields store one component.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import FieldCompatibilityError
from .fields import ScalarField, VectorField, Tensor2Field, Tensor3Field
from .grid import Grid

__all__ = ["write_snapshot", "read_snapshot"]


def write_snapshot(path, field, *, time: float, name: str) -> None:
    grid = field.grid
    if isinstance(field, ScalarField):
        data = field.values[np.newaxis]
    else:
        data = field.components.reshape(-1, *grid.shape)
    header = {
        "dim": grid.dim,
        "n": grid.n,
        "L": grid.length,
        "components": int(data.shape[0]),
        "time": float(time),
        "name": name,
    }
    with open(path, "wb") as fh:
        fh.write((json.dumps(header, sort_keys=True) + "\n").encode("ascii"))
        fh.write(np.ascontiguousarray(data, dtype="<f8").tobytes())


def read_snapshot(path):
    """Load a snapshot; returns ``(field, header_dict)``.

    The field type is recovered from the component count: 1 scalar,
    dim vector, dim^2 rank-2, dim^3 rank-3.
    """
    raw = Path(path).read_bytes()
    newline = raw.index(b"\n")
    header = json.loads(raw[:newline].decode("ascii"))
    grid = Grid(header["dim"], header["n"], header["L"])
    ncomp = header["components"]
    data = np.frombuffer(raw[newline + 1:], dtype="<f8").astype(np.float64)
    expected = ncomp * np.prod(grid.shape)
    if data.size != expected:
        raise FieldCompatibilityError(
            f"snapshot payload has {data.size} values, expected {expected}"
        )
    data = data.reshape(ncomp, *grid.shape)
    d = grid.dim
    if ncomp == 1:
        field = ScalarField(grid, data[0])
    elif ncomp == d:
        field = VectorField(grid, data)
    elif ncomp == d * d:
        field = Tensor2Field(grid, data.reshape(d, d, *grid.shape))
    elif ncomp == d * d * d:
        field = Tensor3Field(grid, data.reshape(d, d, d, *grid.shape))
    else:
        raise FieldCompatibilityError(f"cannot map {ncomp} components to a field type")
    return field, header
