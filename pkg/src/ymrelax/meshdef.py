"""Piecewise-affine deformations on interval and triangulated square meshes.

Nodes carry deformation values; gradients are constant per cell (slope on
an interval cell, the P1 gradient on a triangle).  These are the discrete
deformations whose cell gradients the relaxation couples to a measure
field cell by cell.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .matcore import Mat
from .measure import Mesh


@dataclass(frozen=True, eq=False)
class MeshDeformation:
    """Node values of a continuous piecewise-affine map on a mesh.

    1D: values has shape (cells + 1,), node i at x = i / cells.
    2D: values has shape ((nx+1)*(ny+1), 2), node (i, j) at
    (i/nx, j/ny) stored at index j*(nx+1) + i.
    """

    mesh: Mesh
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", v)
        if self.mesh.dim == 1:
            if v.shape != (self.mesh.shape[0] + 1,):
                raise ValueError("node array shape does not match the mesh")
        else:
            nx, ny = self.mesh.shape
            if v.shape != ((nx + 1) * (ny + 1), 2):
                raise ValueError("node array shape does not match the mesh")
        if not np.all(np.isfinite(v)):
            raise ValueError("node values must be finite")

    @classmethod
    def affine(cls, mesh: Mesh, f: Mat) -> "MeshDeformation":
        if mesh.dim == 1:
            if f.n != 1:
                raise ValueError("matrix dimension does not match the mesh")
            cells = mesh.shape[0]
            xs = np.linspace(0.0, 1.0, cells + 1)
            return cls(mesh, f.flat[0] * xs)
        if f.n != 2:
            raise ValueError("matrix dimension does not match the mesh")
        nx, ny = mesh.shape
        vals = np.empty(((nx + 1) * (ny + 1), 2))
        for j in range(ny + 1):
            for i in range(nx + 1):
                x, y = i / nx, j / ny
                vals[j * (nx + 1) + i, 0] = f.entry(0, 0) * x + f.entry(0, 1) * y
                vals[j * (nx + 1) + i, 1] = f.entry(1, 0) * x + f.entry(1, 1) * y
        return cls(mesh, vals)

    @property
    def matrix_dim(self) -> int:
        return self.mesh.dim

    def node_index(self, i: int, j: int = 0) -> int:
        if self.mesh.dim == 1:
            return i
        return j * (self.mesh.shape[0] + 1) + i

    def cell_gradient(self, c: int) -> Mat:
        if self.mesh.dim == 1:
            cells = self.mesh.shape[0]
            return Mat.scalar((self.values[c + 1] - self.values[c]) * cells)
        verts = self.mesh.triangle_vertices(c)
        idx = [self._vertex_index(p) for p in verts]
        y = self.values[idx]  # (3, 2)
        x0, x1, x2 = (np.array(p) for p in verts)
        dx = np.column_stack((x1 - x0, x2 - x0))  # (2, 2)
        dy = np.column_stack((y[1] - y[0], y[2] - y[0]))
        g = dy @ np.linalg.inv(dx)
        return Mat.from_flat(g.reshape(-1))

    def _vertex_index(self, p) -> int:
        nx, ny = self.mesh.shape
        i = round(p[0] * nx)
        j = round(p[1] * ny)
        return j * (nx + 1) + i

    def cell_gradients(self) -> list:
        return [self.cell_gradient(c) for c in range(self.mesh.n_cells)]

    def energy(self, v) -> float:
        """Integral of v over the domain for the cell gradients."""
        vol = self.mesh.cell_volume
        total = 0.0
        for g in self.cell_gradients():
            val = v.evaluate(g)
            if val == math.inf:
                return math.inf
            total += vol * val
        return total

    def as_gradient_field(self):
        """Exact re-expression as a slab field (interval meshes only)."""
        from .laminate import GradientField
        if self.mesh.dim != 1:
            raise DomainError("only interval deformations have a slab structure")
        cells = self.mesh.shape[0]
        slopes = [(self.values[i + 1] - self.values[i]) * cells
                  for i in range(cells)]
        return GradientField.from_slopes_1d(slopes, [1.0 / cells] * cells,
                                            float(self.values[0]))

    def to_csv_rows(self) -> list:
        if self.mesh.dim == 1:
            rows = [["node", "x", "y"]]
            cells = self.mesh.shape[0]
            for i, val in enumerate(self.values):
                rows.append([i, i / cells, float(val)])
            return rows
        rows = [["node", "x1", "x2", "y1", "y2"]]
        nx, ny = self.mesh.shape
        for j in range(ny + 1):
            for i in range(nx + 1):
                k = j * (nx + 1) + i
                rows.append([k, i / nx, j / ny,
                             float(self.values[k, 0]), float(self.values[k, 1])])
        return rows

    def to_json_dict(self) -> dict:
        return {"mesh": self.mesh.to_json_dict(),
                "values": np.asarray(self.values).tolist()}

    @classmethod
    def from_json_dict(cls, d: dict) -> "MeshDeformation":
        return cls(Mesh.from_json_dict(d["mesh"]), np.array(d["values"], dtype=float))
