"""Kuhn (Freudenthal) triangulations of boxes and a plain-text mesh format.

Each grid cell is split into N! simplices, one per permutation π, with
vertices v_0 = corner, v_k = v_{k-1} + h_{π(k)} e_{π(k)}.  The split is the
same in every cell, so the triangulation is conforming, and doubling the
divisions yields a nested refinement.
"""

from __future__ import annotations

import hashlib
import io
import itertools
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

SUPPORTED_DIMS = (2, 3)


class MeshError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class SimplicialMesh:
    vertices: np.ndarray  # (n_vertices, N)
    cells: np.ndarray  # (n_cells, N+1), positively oriented
    boundary_vertices: np.ndarray = field(default=None)  # sorted vertex indices

    def __post_init__(self):
        verts = np.ascontiguousarray(self.vertices, dtype=float)
        cells = np.ascontiguousarray(self.cells, dtype=np.int64)
        if verts.ndim != 2 or cells.ndim != 2 or cells.shape[1] != verts.shape[1] + 1:
            raise MeshError("cells must list N+1 vertex indices for N-dimensional vertices")
        cells = _orient(verts, cells)
        verts.setflags(write=False)
        cells.setflags(write=False)
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "cells", cells)
        if self.boundary_vertices is None:
            bnd = topological_boundary(cells)
        else:
            bnd = np.unique(np.asarray(self.boundary_vertices, dtype=np.int64))
        bnd.setflags(write=False)
        object.__setattr__(self, "boundary_vertices", bnd)

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_cells(self) -> int:
        return self.cells.shape[0]

    def cell_volumes(self) -> np.ndarray:
        return np.abs(_signed_volumes(self.vertices, self.cells))

    def checksum(self) -> str:
        h = hashlib.sha256()
        h.update(np.int64(self.dim).tobytes())
        h.update(self.vertices.astype("<f8").tobytes())
        h.update(self.cells.astype("<i8").tobytes())
        return h.hexdigest()


def _signed_volumes(vertices: np.ndarray, cells: np.ndarray) -> np.ndarray:
    P = vertices[cells]
    edges = P[:, 1:, :] - P[:, :1, :]
    return np.linalg.det(edges) / math.factorial(vertices.shape[1])


def _orient(vertices: np.ndarray, cells: np.ndarray) -> np.ndarray:
    vol = _signed_volumes(vertices, cells)
    if np.any(vol == 0.0):
        raise MeshError("degenerate cell with zero volume")
    neg = vol < 0
    if np.any(neg):
        cells = cells.copy()
        cells[neg, 0], cells[neg, 1] = cells[neg, 1].copy(), cells[neg, 0].copy()
    return cells


def facets(cells: np.ndarray) -> np.ndarray:
    """All (cell, local facet) vertex tuples, each sorted; shape (n_cells*(N+1), N)."""
    n = cells.shape[1]
    faces = [np.delete(cells, k, axis=1) for k in range(n)]
    return np.sort(np.concatenate(faces, axis=0), axis=1)


def topological_boundary(cells: np.ndarray) -> np.ndarray:
    """Vertices of facets that belong to exactly one cell."""
    f = facets(cells)
    uniq, counts = np.unique(f, axis=0, return_counts=True)
    return np.unique(uniq[counts == 1])


def conformity_audit(mesh: SimplicialMesh) -> bool:
    """Every facet is shared by at most two cells and no cell repeats."""
    f = facets(mesh.cells)
    _, counts = np.unique(f, axis=0, return_counts=True)
    dup = np.unique(np.sort(mesh.cells, axis=1), axis=0).shape[0] != mesh.n_cells
    return bool(counts.max() <= 2 and not dup)


PATTERNS = ("kuhn", "reflected")


def build_box_mesh(
    N: int,
    divisions: Sequence[int],
    lengths: Optional[Sequence[float]] = None,
    pattern: str = "kuhn",
) -> SimplicialMesh:
    """Kuhn triangulation of [0, L_1] x ... x [0, L_N] with n_i cells per axis.

    ``pattern="reflected"`` mirrors the split along every axis whose cell index
    is odd.  The result keeps all reflection symmetries of the box (the plain
    Kuhn split only keeps axis permutations and the central inversion).
    """
    if pattern not in PATTERNS:
        raise MeshError(f"pattern must be one of {PATTERNS}, got {pattern!r}")
    if N not in SUPPORTED_DIMS:
        raise MeshError(f"only N in {SUPPORTED_DIMS} is supported, got {N}")
    if np.isscalar(divisions):
        divisions = [int(divisions)] * N
    if lengths is None:
        lengths = [1.0] * N
    elif np.isscalar(lengths):
        lengths = [float(lengths)] * N
    divisions = [int(d) for d in divisions]
    lengths = [float(x) for x in lengths]
    if len(divisions) != N or len(lengths) != N:
        raise MeshError("need one division count and one length per axis")
    if min(divisions) < 1:
        raise MeshError(f"divisions must be >= 1, got {divisions}")
    if min(lengths) <= 0:
        raise MeshError(f"lengths must be positive, got {lengths}")

    shape = [d + 1 for d in divisions]
    axes = [np.linspace(0.0, L, d + 1) for d, L in zip(divisions, lengths)]
    grid = np.meshgrid(*axes, indexing="ij")
    vertices = np.stack([g.ravel() for g in grid], axis=1)

    strides = np.array([int(np.prod(shape[k + 1:])) for k in range(N)], dtype=np.int64)
    corners = np.stack(
        np.meshgrid(*[np.arange(d) for d in divisions], indexing="ij"), axis=-1
    ).reshape(-1, N)
    base = corners @ strides
    parity = corners % 2 if pattern == "reflected" else np.zeros_like(corners)
    cells = []
    for perm in itertools.permutations(range(N)):
        bits = np.zeros(N, dtype=np.int64)
        idx = [base + (parity ^ bits) @ strides]
        for axis in perm:
            bits[axis] = 1
            idx.append(base + (parity ^ bits) @ strides)
        cells.append(np.stack(idx, axis=1))
    # cell-major ordering: all simplices of grid cell 0, then cell 1, ...
    cells = np.stack(cells, axis=1).reshape(-1, N + 1)

    ijk = np.stack(np.unravel_index(np.arange(vertices.shape[0]), shape), axis=1)
    on_bnd = np.any((ijk == 0) | (ijk == np.array(divisions)), axis=1)
    return SimplicialMesh(vertices, cells, np.flatnonzero(on_bnd))


def volume(mesh: SimplicialMesh) -> float:
    return float(np.sum(mesh.cell_volumes()))


# text format ---------------------------------------------------------------


def dumps_mesh(mesh: SimplicialMesh) -> str:
    out = io.StringIO()
    out.write(f"DIM {mesh.dim}\nVERTICES {mesh.n_vertices}\nCELLS {mesh.n_cells}\n")
    for v in mesh.vertices:
        out.write(" ".join(format(float(x), ".17g") for x in v) + "\n")
    for c in mesh.cells:
        out.write(" ".join(str(int(i)) for i in c) + "\n")
    return out.getvalue()


def loads_mesh(text: str) -> SimplicialMesh:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    try:
        header = {}
        for ln in lines[:3]:
            key, val = ln.split()
            header[key] = int(val)
        N, nv, nc = header["DIM"], header["VERTICES"], header["CELLS"]
        verts = np.array([[float(x) for x in ln.split()] for ln in lines[3 : 3 + nv]])
        cells = np.array([[int(x) for x in ln.split()] for ln in lines[3 + nv : 3 + nv + nc]])
    except (KeyError, ValueError, IndexError) as exc:
        raise MeshError(f"malformed mesh file: {exc}") from exc
    if verts.shape != (nv, N) or cells.shape != (nc, N + 1):
        raise MeshError("mesh file counts do not match its header")
    return SimplicialMesh(verts, cells)


def write_mesh(mesh: SimplicialMesh, path) -> None:
    Path(path).write_text(dumps_mesh(mesh))


def read_mesh(path) -> SimplicialMesh:
    return loads_mesh(Path(path).read_text())
