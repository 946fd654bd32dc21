"""
CSV and binary dumps of fields and boundary data.

CSV numbers use 17 significant digits so dumps round-trip exactly. The binary
format starts with the magic b"PINV1", followed by little-endian int32 values
(dim, n_levels, spatial shape...) and the little-endian doubles of the field,
row-major by time level.
"""
import logging
import struct
from pathlib import Path
from typing import Sequence, Tuple, Union

import numpy as np

from .grid import Field, SpaceTimeGrid

logger = logging.getLogger(__name__)

MAGIC = b"PINV1"
CSV_FORMAT = "%.17g"
AXIS_NAMES = ("x", "y")

PathLike = Union[str, Path]


def write_table(path: PathLike, columns: Sequence[str], rows: np.ndarray) -> Path:
    """Write a numeric table as CSV with full round-trip precision."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    if rows.size == 0:
        rows = rows.reshape(0, len(columns))
    np.savetxt(path, rows, fmt=CSV_FORMAT, delimiter=",", header=",".join(columns), comments="")
    return path


def read_table(path: PathLike) -> Tuple[list, np.ndarray]:
    """Read a CSV written by write_table; returns (columns, rows)."""
    with open(path, "r") as f:
        columns = f.readline().strip().split(",")
    rows = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return columns, rows


def field_rows(field: Field) -> Tuple[list, np.ndarray]:
    grid = field.grid
    n_nodes = int(np.prod(grid.shape))
    t = np.repeat(grid.times, n_nodes)
    coords = [np.tile(c.ravel(), grid.n_levels) for c in grid.coords]
    columns = ["t"] + list(AXIS_NAMES[: grid.dim]) + ["value"]
    return columns, np.column_stack([t] + coords + [field.values.reshape(-1)])


def field_to_csv(field: Field, path: PathLike) -> Path:
    """Dump a field as (t, x[, y], value) rows, boundary nodes included."""
    columns, rows = field_rows(field)
    return write_table(path, columns, rows)


def boundary_to_csv(grid: SpaceTimeGrid, values: np.ndarray, path: PathLike) -> Path:
    """Dump boundary data of shape (nt+1, n_boundary) as (t, node, x[, y], value) rows."""
    nb = grid.n_boundary
    t = np.repeat(grid.times[: values.shape[0]], nb)
    node = np.tile(np.arange(nb), values.shape[0])
    coords = [np.tile(c, values.shape[0]) for c in grid.boundary_coords]
    columns = ["t", "node"] + list(AXIS_NAMES[: grid.dim]) + ["value"]
    return write_table(path, columns, np.column_stack([t, node] + coords + [values.reshape(-1)]))


def write_binary(field: Union[Field, np.ndarray], path: PathLike) -> Path:
    """Write the PINV1 binary dump of a field."""
    values = field.values if isinstance(field, Field) else np.asarray(field, dtype=float)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    dim = values.ndim - 1
    header = MAGIC + struct.pack("<" + "i" * (values.ndim + 1), dim, *values.shape)
    with open(path, "wb") as f:
        f.write(header)
        f.write(np.ascontiguousarray(values, dtype="<f8").tobytes(order="C"))
    return path


def read_binary(path: PathLike) -> np.ndarray:
    """Read a PINV1 dump back into an array of shape (n_levels, *spatial_shape)."""
    with open(path, "rb") as f:
        magic = f.read(len(MAGIC))
        if magic != MAGIC:
            raise ValueError(f"{path} is not a PINV1 dump")
        (dim,) = struct.unpack("<i", f.read(4))
        shape = struct.unpack("<" + "i" * (dim + 1), f.read(4 * (dim + 1)))
        data = np.frombuffer(f.read(), dtype="<f8")
    expected = int(np.prod(shape))
    if data.size != expected:
        raise ValueError(f"{path}: expected {expected} values, found {data.size}")
    return data.reshape(shape).astype(float)
