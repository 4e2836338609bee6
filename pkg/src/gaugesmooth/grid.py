"""Flat cubical cell complexes: boxes with boundary and periodic tori.

A k-cell is identified by its direction set ``S`` (the ``k`` axes it
spans, sorted) and the integer position of its lowest corner.  Cells are
ordered lexicographically: first by direction set (``itertools.combinations``
order), then row-major over positions.  This ordering is part of the file
format contract.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations

import numpy as np
import scipy.sparse as sp

BOX = "box"
TORUS = "torus"


@dataclass(frozen=True)
class Block:
    """One direction set's slice of the k-cell enumeration."""

    axes: tuple[int, ...]
    shape: tuple[int, ...]
    offset: int

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def slice(self) -> slice:
        return slice(self.offset, self.offset + self.size)


@dataclass(frozen=True)
class TraceMask:
    """Boundary cells per degree, split into tangential and normal.

    A boundary k-cell touches the boundary of the box.  It is tangential if
    it lies inside one boundary face and normal otherwise.
    """

    tangential: tuple[np.ndarray, ...]
    normal: tuple[np.ndarray, ...]

    def is_empty(self) -> bool:
        return all(t.size == 0 for t in self.tangential) and all(
            v.size == 0 for v in self.normal
        )


@dataclass(frozen=True, eq=True)
class Grid:
    n: int
    counts: tuple[int, ...]
    h: float
    topology: str = BOX
    origin: tuple[float, ...] = field(default=())

    def __post_init__(self):
        if self.n not in (2, 3):
            raise ValueError(f"dimension must be 2 or 3, got {self.n}")
        if not self.h > 0:
            raise ValueError(f"spacing h must be positive, got {self.h}")
        if self.topology not in (BOX, TORUS):
            raise ValueError(f"unknown topology {self.topology!r}")
        counts = tuple(int(c) for c in self.counts)
        if len(counts) != self.n:
            raise ValueError(f"need {self.n} counts, got {len(counts)}")
        if min(counts) < 2:
            raise ValueError(f"need at least 2 cells per axis, got {counts}")
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "h", float(self.h))
        origin = tuple(float(o) for o in self.origin) or (0.0,) * self.n
        if len(origin) != self.n:
            raise ValueError("origin has wrong length")
        object.__setattr__(self, "origin", origin)

    # -- enumeration ---------------------------------------------------

    @property
    def periodic(self) -> bool:
        return self.topology == TORUS

    def vertex_counts(self) -> tuple[int, ...]:
        if self.periodic:
            return self.counts
        return tuple(c + 1 for c in self.counts)

    def block_shape(self, axes) -> tuple[int, ...]:
        vc = self.vertex_counts()
        return tuple(self.counts[i] if i in axes else vc[i] for i in range(self.n))

    @cached_property
    def _blocks(self) -> tuple[tuple[Block, ...], ...]:
        out = []
        for k in range(self.n + 1):
            offset = 0
            blocks = []
            for axes in combinations(range(self.n), k):
                shape = self.block_shape(axes)
                blocks.append(Block(axes, shape, offset))
                offset += int(np.prod(shape))
            out.append(tuple(blocks))
        return tuple(out)

    def blocks(self, k: int) -> tuple[Block, ...]:
        self._check_degree(k)
        return self._blocks[k]

    def block(self, k: int, axes) -> Block:
        axes = tuple(axes)
        for b in self.blocks(k):
            if b.axes == axes:
                return b
        raise KeyError(axes)

    def num_cells(self, k: int) -> int:
        return sum(b.size for b in self.blocks(k))

    def _check_degree(self, k: int) -> None:
        if not 0 <= k <= self.n:
            raise ValueError(f"degree {k} outside 0..{self.n}")

    @property
    def lengths(self) -> tuple[float, ...]:
        return tuple(c * self.h for c in self.counts)

    @property
    def volume(self) -> float:
        return float(np.prod(self.lengths))

    # -- geometry ------------------------------------------------------

    def cell_centers(self, k: int) -> np.ndarray:
        """Coordinates of k-cell centers, shape (num_cells, n)."""
        pts = []
        for b in self.blocks(k):
            idx = np.indices(b.shape).reshape(self.n, -1).T.astype(float)
            for a in b.axes:
                idx[:, a] += 0.5
            pts.append(np.asarray(self.origin) + self.h * idx)
        return np.concatenate(pts, axis=0)

    def block_coords(self, k: int, axes) -> list[np.ndarray]:
        """Per-axis coordinate arrays (meshgrid, ij) for one block."""
        b = self.block(k, axes)
        out = []
        for i in range(self.n):
            x = self.origin[i] + self.h * np.arange(b.shape[i], dtype=float)
            if i in b.axes:
                x = x + 0.5 * self.h
            out.append(x)
        return np.meshgrid(*out, indexing="ij")

    @cached_property
    def _weights(self) -> tuple[np.ndarray, ...]:
        out = []
        for k in range(self.n + 1):
            ws = []
            for b in self.blocks(k):
                w = np.ones(b.shape)
                if not self.periodic:
                    for i in range(self.n):
                        if i in b.axes:
                            continue
                        sl = [slice(None)] * self.n
                        sl[i] = 0
                        w[tuple(sl)] *= 0.5
                        sl[i] = b.shape[i] - 1
                        w[tuple(sl)] *= 0.5
                ws.append(w.ravel())
            arr = np.concatenate(ws)
            arr.setflags(write=False)
            out.append(arr)
        return tuple(out)

    def dual_fraction(self, k: int) -> np.ndarray:
        """Fraction of the full dual cell volume kept inside the domain."""
        self._check_degree(k)
        return self._weights[k]

    def mass(self, k: int) -> np.ndarray:
        """Diagonal of the Hodge star on integrated k-cochains."""
        return self.dual_fraction(k) * self.h ** (self.n - 2 * k)

    # -- incidence -----------------------------------------------------

    def _index(self, k: int, axes, pos: np.ndarray) -> np.ndarray:
        b = self.block(k, axes)
        pos = np.asarray(pos)
        if self.periodic:
            pos = pos % np.asarray(b.shape)[:, None]
        return b.offset + np.ravel_multi_index(tuple(pos), b.shape)

    @cached_property
    def _coboundaries(self) -> tuple[sp.csr_matrix, ...]:
        mats = []
        for k in range(self.n):
            rows, cols, vals = [], [], []
            for b in self.blocks(k + 1):
                pos = np.indices(b.shape).reshape(self.n, -1)
                ridx = b.offset + np.arange(b.size)
                for j, a in enumerate(b.axes):
                    face = b.axes[:j] + b.axes[j + 1:]
                    sign = (-1) ** j
                    shifted = pos.copy()
                    shifted[a] += 1
                    rows += [ridx, ridx]
                    cols += [self._index(k, face, shifted), self._index(k, face, pos)]
                    vals += [np.full(b.size, sign), np.full(b.size, -sign)]
            mat = sp.csr_matrix(
                (np.concatenate(vals).astype(np.int64),
                 (np.concatenate(rows), np.concatenate(cols))),
                shape=(self.num_cells(k + 1), self.num_cells(k)),
            )
            mats.append(mat)
        return tuple(mats)

    def coboundary(self, k: int) -> sp.csr_matrix:
        """Signed incidence matrix from k-cochains to (k+1)-cochains."""
        if not 0 <= k < self.n:
            raise ValueError(f"coboundary degree {k} outside 0..{self.n - 1}")
        return self._coboundaries[k]

    def trace_mask(self) -> TraceMask:
        return trace_mask(self)

    # -- serialization -------------------------------------------------

    def descriptor(self) -> dict:
        return {
            "n": self.n,
            "counts": list(self.counts),
            "h": self.h,
            "topology": self.topology,
            "origin": list(self.origin),
            "ordering": "lex",
        }

    @cached_property
    def hash(self) -> str:
        blob = json.dumps(self.descriptor(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    @classmethod
    def from_descriptor(cls, d: dict) -> "Grid":
        if d.get("ordering", "lex") != "lex":
            raise ValueError(f"unsupported cell ordering {d['ordering']!r}")
        return cls(int(d["n"]), tuple(d["counts"]), float(d["h"]), d["topology"],
                   tuple(d.get("origin", ())))


def build_grid(n: int, counts, h: float, topology: str = BOX, origin=()) -> Grid:
    """Build a flat cubical complex.

    >>> g = build_grid(2, (4, 4), 0.25, "torus")
    >>> [g.num_cells(k) for k in range(3)]
    [16, 32, 16]
    """
    if isinstance(counts, int):
        counts = (counts,) * n
    return Grid(n, tuple(counts), h, topology, tuple(origin))


def expected_cell_count(n: int, counts, k: int, topology: str) -> int:
    """Closed-form k-cell count of a cubical box or torus."""
    total = 0
    for axes in combinations(range(n), k):
        prod = 1
        for i in range(n):
            c = counts[i]
            prod *= c if (i in axes or topology == TORUS) else c + 1
        total += prod
    return total


def trace_mask(grid: Grid) -> TraceMask:
    """Classify boundary cells of every degree as tangential or normal."""
    if grid.periodic:
        empty = tuple(np.zeros(0, dtype=np.int64) for _ in range(grid.n + 1))
        return TraceMask(empty, empty)
    tangential, normal = [], []
    for k in range(grid.n + 1):
        tan_k, nor_k = [], []
        for b in grid.blocks(k):
            pos = np.indices(b.shape).reshape(grid.n, -1)
            inside_face = np.zeros(b.size, dtype=bool)
            touches = np.zeros(b.size, dtype=bool)
            for i in range(grid.n):
                lo = pos[i] == 0
                hi_vertex = pos[i] + (1 if i in b.axes else 0) == grid.counts[i]
                touches |= lo | hi_vertex
                if i not in b.axes:
                    inside_face |= lo | (pos[i] == grid.counts[i])
            ids = b.offset + np.arange(b.size)
            tan_k.append(ids[inside_face])
            nor_k.append(ids[touches & ~inside_face])
        tangential.append(np.concatenate(tan_k))
        normal.append(np.concatenate(nor_k))
    return TraceMask(tuple(tangential), tuple(normal))


def sub_box(grid: Grid, lo, hi) -> tuple[Grid, list[np.ndarray]]:
    """Restrict to the vertex-index box ``lo..hi`` (inclusive vertex range).

    Returns the sub-grid (always a box) and, per degree, the parent indices
    of the retained cells in the sub-grid's own ordering.
    """
    lo = np.asarray(lo, dtype=int)
    hi = np.asarray(hi, dtype=int)
    counts = tuple(int(c) for c in hi - lo)
    if min(counts) < 2:
        raise ValueError(f"sub-box needs at least 2 cells per axis, got {counts}")
    limit = np.asarray(grid.counts)
    if np.any(lo < 0) or np.any(hi > limit):
        raise ValueError("sub-box leaves the parent grid")
    origin = tuple(np.asarray(grid.origin) + grid.h * lo)
    sub = Grid(grid.n, counts, grid.h, BOX, origin)
    maps = []
    for k in range(grid.n + 1):
        idx = []
        for b in sub.blocks(k):
            pos = np.indices(b.shape).reshape(grid.n, -1) + lo[:, None]
            idx.append(grid._index(k, b.axes, pos))
        maps.append(np.concatenate(idx))
    return sub, maps
