"""Triangle meshes as design leaves.

The mesh is converted once, at construction, to a narrow-band signed
distance grid (trilinear queries, sign from nearest-triangle normals with
a winding-number fallback), so repeated queries never touch the triangles
again. The input surface should be closed; open surfaces get a
best-effort sign.
"""

from __future__ import annotations

import os

import numpy as np

from .materials import FractionSet
from .nodes import DesignNode
from .sdfgrid import NarrowBandGrid
from .stl import read_stl


class MeshImport(DesignNode):
    kind = "mesh_import"

    def __init__(
        self,
        mesh,
        material: int | None = None,
        grid_resolution: float = 0.1,
        band_cells: int = 3,
    ):
        self.mesh_path = None
        if isinstance(mesh, (str, os.PathLike)):
            self.mesh_path = str(mesh)
            vertices, triangles = read_stl(mesh)
        else:
            vertices, triangles = mesh
        self.material = None if material is None else int(material)
        self.grid_resolution = float(grid_resolution)
        self.band_cells = int(band_cells)
        self.grid = NarrowBandGrid(
            np.asarray(vertices, dtype=np.float64),
            np.asarray(triangles, dtype=np.int64),
            cell=self.grid_resolution,
            band_cells=self.band_cells,
        )

    def sdf_many(self, pts):
        return self.grid.sample(pts)

    def bounds(self):
        return self.grid.surface_bounds

    def fractions_many(self, pts):
        if self.material is None:
            return {}
        return {self.material: np.ones(len(pts))}

    def fractions_at(self, p):
        return FractionSet() if self.material is None else FractionSet({self.material: 1.0})

    def _params(self):
        return (self.mesh_path, self.material, self.grid_resolution)
