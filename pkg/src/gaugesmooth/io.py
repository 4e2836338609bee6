"""File formats: cochain files, immersion data, PLY vertex lists, manifests.

A cochain file is one JSON header line followed by little-endian float64
values (cells x rows x cols, row-major, lexicographic cell order).
"""
from __future__ import annotations

import hashlib
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .cochains import Cochain, LieAlgebra
from .grid import Grid

MAGIC = "gaugesmooth-cochain/1"
IMMERSION_MAGIC = "gaugesmooth-immersion/1"


class GridMismatchError(ValueError):
    """A file refers to a different grid than the one supplied."""


def atomic_write(path, data: bytes | str) -> None:
    """Write via a temporary file in the same directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(data, str):
        data = data.encode()
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def file_hash(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _header_bytes(header: dict) -> bytes:
    return (json.dumps(header, sort_keys=True) + "\n").encode()


def _split(blob: bytes, magic: str) -> tuple[dict, bytes]:
    line, _, rest = blob.partition(b"\n")
    header = json.loads(line)
    if header.get("format") != magic:
        raise ValueError(f"not a {magic} file")
    return header, rest


def cochain_bytes(alpha: Cochain) -> bytes:
    header = {
        "format": MAGIC,
        "grid": alpha.grid.descriptor(),
        "grid_hash": alpha.grid.hash,
        "k": alpha.degree,
        "shape": list(alpha.shape),
        "flavor": alpha.algebra.flavor if alpha.algebra else None,
        "m": alpha.algebra.m if alpha.algebra else alpha.shape[0],
        "dual": alpha.dual,
        "count": int(alpha.values.shape[0]),
    }
    return _header_bytes(header) + alpha.values.astype("<f8").tobytes()


def write_cochain(path, alpha: Cochain) -> None:
    atomic_write(path, cochain_bytes(alpha))


def read_cochain(path, grid: Grid | None = None) -> Cochain:
    header, rest = _split(Path(path).read_bytes(), MAGIC)
    file_grid = Grid.from_descriptor(header["grid"])
    if file_grid.hash != header["grid_hash"]:
        raise GridMismatchError(f"{path}: header grid hash does not match its descriptor")
    if grid is not None and grid.hash != header["grid_hash"]:
        raise GridMismatchError(
            f"{path}: grid hash {header['grid_hash']} differs from expected {grid.hash}"
        )
    shape = (header["count"],) + tuple(header["shape"])
    values = np.frombuffer(rest, dtype="<f8")
    if values.size != int(np.prod(shape)):
        raise ValueError(f"{path}: expected {int(np.prod(shape))} values, found {values.size}")
    algebra = LieAlgebra(header["flavor"], header["m"]) if header["flavor"] else None
    return Cochain(file_grid, header["k"], values.reshape(shape), algebra, header["dual"])


def write_immersion(path, data) -> None:
    arrays = {"metric": data.metric, "second_form": data.second_form,
              "normal_conn": data.normal_conn}
    if data.reference is not None:
        arrays["reference"] = data.reference
    header = {
        "format": IMMERSION_MAGIC,
        "grid": data.grid.descriptor(),
        "grid_hash": data.grid.hash,
        "codim": data.codim,
        "blocks": [[name, list(a.shape)] for name, a in arrays.items()],
    }
    body = b"".join(np.ascontiguousarray(a, dtype="<f8").tobytes() for a in arrays.values())
    atomic_write(path, _header_bytes(header) + body)


def read_immersion(path):
    from .pfaff import ImmersionData

    header, rest = _split(Path(path).read_bytes(), IMMERSION_MAGIC)
    grid = Grid.from_descriptor(header["grid"])
    if grid.hash != header["grid_hash"]:
        raise GridMismatchError(f"{path}: header grid hash does not match its descriptor")
    flat = np.frombuffer(rest, dtype="<f8")
    arrays, offset = {}, 0
    for name, shape in header["blocks"]:
        size = int(np.prod(shape))
        arrays[name] = flat[offset: offset + size].reshape(shape).copy()
        offset += size
    if offset != flat.size:
        raise ValueError(f"{path}: trailing or missing data")
    return ImmersionData(grid, arrays["metric"], arrays["second_form"], arrays["normal_conn"],
                         arrays.get("reference"))


def ply_text(points: np.ndarray) -> str:
    """ASCII PLY vertex list; extra ambient coordinates become ``w0, w1, ...``."""
    dim = points.shape[1]
    names = ["x", "y", "z"][:dim] + [f"w{i}" for i in range(dim - 3)]
    lines = ["ply", "format ascii 1.0", f"element vertex {len(points)}"]
    lines += [f"property double {n}" for n in names]
    lines.append("end_header")
    lines += [" ".join(repr(float(v)) for v in row) for row in points]
    return "\n".join(lines) + "\n"


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_default) + "\n"


def _default(o):
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialize {type(o).__name__}")
