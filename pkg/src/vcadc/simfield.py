"""Simulation results as a design node.

A tetrahedral FEA mesh plus nodal results become queryable geometry and
materials: the signed distance comes from a narrow-band grid built over the
extracted boundary surface, and volume fractions come from barycentric
interpolation of the nodal results fed through user expressions (bindings:
each result column by name, plus ``len`` for the displacement magnitude).

Result values pass through with no unit conversion; published thresholds
usually imply meters for displacements while geometry is in mm, so the
mapping expressions own the units.
"""

from __future__ import annotations

import os

import numpy as np

from .errors import DesignError, InpError
from .geom import as_vec3
from .inp import FeaMesh, NodalResults, TetMesh, parse_inp, parse_results_csv
from .materials import FractionSet
from .nodes import DesignNode, compile_expressions, eval_fraction_field
from .sdfgrid import NarrowBandGrid

_FACES = np.array([[0, 2, 1], [0, 1, 3], [1, 2, 3], [0, 3, 2]])

CONTAIN_TOL = 1e-9


def extract_boundary(mesh: TetMesh) -> np.ndarray:
    """Boundary triangles (B, 3) of a tet mesh, oriented outward.

    A face is boundary iff exactly one tetrahedron owns it; orientation
    points away from the owning tet's centroid.
    """
    if not mesh.is_tet:
        raise InpError("boundary extraction requires a tetrahedral mesh")
    faces = mesh.elements[:, _FACES].reshape(-1, 3)  # (4E, 3)
    key = np.sort(faces, axis=1)
    _, first, counts = np.unique(key, axis=0, return_index=True, return_counts=True)
    boundary = faces[first[counts == 1]]
    owner = first[counts == 1] // 4

    v = mesh.coords
    normal = np.cross(v[boundary[:, 1]] - v[boundary[:, 0]], v[boundary[:, 2]] - v[boundary[:, 0]])
    face_center = v[boundary].mean(axis=1)
    tet_center = v[mesh.elements[owner]].mean(axis=1)
    inward = np.einsum("nd,nd->n", normal, face_center - tet_center) < 0
    boundary[inward] = boundary[inward][:, [0, 2, 1]]
    return boundary


class AabbTree:
    """Axis-aligned box tree over tetrahedra for batch point location."""

    LEAF_SIZE = 8

    def __init__(self, mesh: TetMesh):
        if not mesh.is_tet:
            raise InpError("point location requires a tetrahedral mesh")
        self.mesh = mesh
        tets = mesh.coords[mesh.elements]  # (E, 4, 3)
        lo = tets.min(axis=1)
        hi = tets.max(axis=1)
        centroids = tets.mean(axis=1)
        n = len(tets)

        # Barycentric solve matrices: lam123 = Minv @ (p - v3).
        m = np.stack(
            [tets[:, 0] - tets[:, 3], tets[:, 1] - tets[:, 3], tets[:, 2] - tets[:, 3]], axis=2
        )
        det = np.linalg.det(m)
        if np.any(np.abs(det) / 6.0 < 1e-15):
            raise DesignError("degenerate tetrahedron in mesh (volume < 1e-15 mm^3)")
        self._minv = np.linalg.inv(m)
        self._v3 = tets[:, 3]

        self.order = np.arange(n)
        node_lo: list[np.ndarray] = []
        node_hi: list[np.ndarray] = []
        self.node_left: list[int] = []
        self.node_right: list[int] = []
        self.node_start: list[int] = []
        self.node_end: list[int] = []
        self._build(0, n, lo, hi, centroids, node_lo, node_hi)
        self.lo = np.array(node_lo)
        self.hi = np.array(node_hi)

    def _build(self, start, end, lo, hi, centroids, node_lo, node_hi) -> int:
        idx = self.order[start:end]
        node = len(node_lo)
        node_lo.append(lo[idx].min(axis=0))
        node_hi.append(hi[idx].max(axis=0))
        self.node_left.append(-1)
        self.node_right.append(-1)
        self.node_start.append(start)
        self.node_end.append(end)
        if end - start > self.LEAF_SIZE:
            spread = centroids[idx].max(axis=0) - centroids[idx].min(axis=0)
            axis = int(np.argmax(spread))
            local = np.argsort(centroids[idx, axis], kind="stable")
            self.order[start:end] = idx[local]
            mid = start + (end - start) // 2
            self.node_left[node] = self._build(start, mid, lo, hi, centroids, node_lo, node_hi)
            self.node_right[node] = self._build(mid, end, lo, hi, centroids, node_lo, node_hi)
        return node

    def barycentric(self, tet: np.ndarray, pts: np.ndarray) -> np.ndarray:
        """Barycentric coordinates (N, 4) of each point in its own tet."""
        lam123 = np.einsum("nij,nj->ni", self._minv[tet], pts - self._v3[tet])
        return np.concatenate([lam123, 1.0 - lam123.sum(axis=1, keepdims=True)], axis=1)

    def locate(self, pts: np.ndarray) -> np.ndarray:
        """Index of the containing tet per point, or -1 outside the mesh.

        Points on shared faces resolve to the lowest element id among the
        containing tets.
        """
        pts = np.asarray(pts, dtype=np.float64)
        n = len(pts)
        ids = self.mesh.element_ids
        best_id = np.full(n, np.iinfo(np.int64).max, dtype=np.int64)
        best = np.full(n, -1, dtype=np.int64)
        stack = [(0, np.arange(n))]
        while stack:
            node, rows = stack.pop()
            sub = pts[rows]
            inside = np.all((sub >= self.lo[node]) & (sub <= self.hi[node]), axis=1)
            rows = rows[inside]
            if rows.size == 0:
                continue
            left = self.node_left[node]
            if left >= 0:
                stack.append((self.node_right[node], rows))
                stack.append((left, rows))
                continue
            for tet in self.order[self.node_start[node] : self.node_end[node]]:
                lam = self.barycentric(np.full(rows.size, tet), pts[rows])
                hit = np.all(lam >= -CONTAIN_TOL, axis=1)
                if not hit.any():
                    continue
                r = rows[hit]
                tid = ids[tet]
                take = tid < best_id[r]
                best_id[r[take]] = tid
                best[r[take]] = tet
        return best

    def interpolate(self, columns: dict[str, np.ndarray], tet: np.ndarray, lam: np.ndarray) -> dict[str, np.ndarray]:
        """Barycentric interpolation of nodal columns at located points."""
        verts = self.mesh.elements[tet]  # (N, 4)
        return {name: np.einsum("nk,nk->n", vals[verts], lam) for name, vals in columns.items()}


class SimulationField(DesignNode):
    """Design node backed by an FEA mesh and its nodal results."""

    kind = "simulation_field"

    def __init__(
        self,
        mesh,
        results,
        expressions,
        materials,
        grid_resolution: float = 0.1,
        band_cells: int = 3,
    ):
        self.inp_path = None
        self.csv_path = None
        if isinstance(mesh, (str, os.PathLike)):
            self.inp_path = str(mesh)
            with open(mesh, "rb") as f:
                mesh = parse_inp(f.read())
        if not isinstance(mesh, FeaMesh) or not mesh.is_tet:
            raise InpError("SimulationField requires a tetrahedral (C3D4) mesh")
        if isinstance(results, (str, os.PathLike)):
            self.csv_path = str(results)
            with open(results, "rb") as f:
                results = parse_results_csv(f.read(), mesh)
        if not isinstance(results, NodalResults):
            raise DesignError("results must be a NodalResults or a CSV path")

        self.programs = compile_expressions(expressions)
        self.materials = tuple(int(m) for m in materials)
        if len(self.programs) != len(self.materials):
            raise DesignError(
                f"one expression per material required: {len(self.programs)} vs {len(self.materials)}"
            )
        self.grid_resolution = float(grid_resolution)
        self.band_cells = int(band_cells)
        self.mesh = mesh
        self.results = results
        self.tree = AabbTree(mesh)
        boundary = extract_boundary(mesh)
        self.grid = NarrowBandGrid(mesh.coords, boundary, cell=self.grid_resolution, band_cells=self.band_cells)

        available = set(results.columns)
        if results.has_displacement:
            available.add("len")
        referenced = set().union(*(p.variables for p in self.programs)) if self.programs else set()
        unknown = referenced - available
        if unknown:
            raise DesignError(
                f"expressions reference columns not in the results: {sorted(unknown)} "
                f"(available: {sorted(available)})"
            )

    def sdf_many(self, pts):
        return self.grid.sample(pts)

    def _bindings(self, tet: np.ndarray, lam: np.ndarray) -> dict[str, np.ndarray]:
        bindings = self.tree.interpolate(self.results.columns, tet, lam)
        if self.results.has_displacement:
            # recomputed from interpolated components: interpolating nodal
            # magnitudes would overestimate across sign changes
            bindings["len"] = np.sqrt(
                bindings["dx"] ** 2 + bindings["dy"] ** 2 + bindings["dz"] ** 2
            )
        return bindings

    def fractions_many(self, pts):
        tet = self.tree.locate(pts)
        found = np.nonzero(tet >= 0)[0]
        out = {mid: np.zeros(len(pts)) for mid in self.materials}
        if found.size == 0:
            return out
        lam = self.tree.barycentric(tet[found], pts[found])
        field, _ = eval_fraction_field(
            self.programs, self.materials, self._bindings(tet[found], lam), found.size
        )
        for mid in self.materials:
            out[mid][found] = field[mid]
        return out

    def fractions_at(self, p):
        p = as_vec3(p).reshape(1, 3)
        tet = self.tree.locate(p)
        if tet[0] < 0:
            return FractionSet()
        lam = self.tree.barycentric(tet, p)
        field, covered = eval_fraction_field(
            self.programs, self.materials, self._bindings(tet, lam), 1
        )
        if not covered[0]:
            return FractionSet()
        return FractionSet({mid: float(field[mid][0]) for mid in self.materials})

    def bounds(self):
        return self.grid.surface_bounds

    def _params(self):
        srcs = tuple(p.source if hasattr(p, "source") else p.pretty() for p in self.programs)
        return (self.inp_path, self.csv_path, srcs, self.materials, self.grid_resolution)
