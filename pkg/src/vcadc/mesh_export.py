"""Segmenting graded designs into discrete slicer meshes.

The continuous fraction space of one reference material is cut into N
ranges; a single sampling pass fills N scalar grids, each holding the
design's signed distance where the local fraction falls in its range and
an exterior sentinel (+2 voxels) everywhere else. Marching cubes then
extracts one watertight triangle mesh per range. Segment surfaces abut
within a voxel of each other but do not share vertices, which slicers
accept.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import DesignError
from .materials import MaterialTable
from .mc_tables import EDGE_TABLE, TRI_TABLE
from .nodes import DesignNode
from .stl import write_stl

MANIFEST_NAME = "mesh_manifest.json"

# Local edge -> (corner offset, axis) with corners on the (i,j,k) grid.
_EDGE_ANCHOR = np.array(
    [
        [0, 0, 0, 0],  # 0: (0,0,0)-(1,0,0)
        [1, 0, 0, 1],  # 1: (1,0,0)-(1,1,0)
        [0, 1, 0, 0],  # 2: (0,1,0)-(1,1,0)
        [0, 0, 0, 1],  # 3: (0,0,0)-(0,1,0)
        [0, 0, 1, 0],  # 4
        [1, 0, 1, 1],  # 5
        [0, 1, 1, 0],  # 6
        [0, 0, 1, 1],  # 7
        [0, 0, 0, 2],  # 8: (0,0,0)-(0,0,1)
        [1, 0, 0, 2],  # 9
        [1, 1, 0, 2],  # 10
        [0, 1, 0, 2],  # 11
    ],
    dtype=np.int64,
)

_CORNER_OFFSETS = np.array(
    [[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0], [0, 0, 1], [1, 0, 1], [1, 1, 1], [0, 1, 1]]
)


@dataclass
class SegmentationSpec:
    """How to split the fraction space of the reference material."""

    count: int
    reference_material: int = 0
    resolution: float = 0.5
    ranges: list[tuple[float, float]] = field(default_factory=list)

    def __post_init__(self):
        if self.count < 1:
            raise DesignError(f"segment count must be >= 1, got {self.count}")
        if self.resolution <= 0:
            raise DesignError(f"resolution must be > 0, got {self.resolution}")
        if not self.ranges:
            edges = np.linspace(0.0, 1.0, self.count + 1)
            self.ranges = [(float(edges[i]), float(edges[i + 1])) for i in range(self.count)]
        if len(self.ranges) != self.count:
            raise DesignError(f"{len(self.ranges)} ranges for {self.count} segments")
        edges = [self.ranges[0][0]] + [r[1] for r in self.ranges]
        if edges[0] != 0.0 or edges[-1] != 1.0 or any(
            self.ranges[i][1] != self.ranges[i + 1][0] for i in range(self.count - 1)
        ):
            raise DesignError("ranges must be contiguous half-open intervals covering [0, 1]")

    def range_index(self, fraction: np.ndarray) -> np.ndarray:
        """Segment index per fraction; intervals half-open, last closed."""
        edges = np.array([r[1] for r in self.ranges[:-1]])
        return np.searchsorted(edges, fraction, side="right")


@dataclass
class SegmentGrids:
    """N scalar node grids sharing one geometry."""

    origin: np.ndarray
    spacing: float
    values: list[np.ndarray]  # each (nx, ny, nz)
    interior_segment: np.ndarray  # (nx, ny, nz) int, -1 where exterior


def sample_segmented_grids(design: DesignNode, spec: SegmentationSpec) -> SegmentGrids:
    """One shared sampling pass filling all N segment grids.

    Grid nodes cover the design bounds plus one padding layer so extracted
    surfaces are always closed. Exterior sentinel is +2 voxels.
    """
    bounds = design.bounds()
    res = spec.resolution
    counts = np.maximum(np.ceil(bounds.size / res - 1e-9).astype(int), 1)
    nx, ny, nz = (int(c) + 3 for c in counts)  # +1 to close, +2 padding layers
    origin = bounds.min - res

    ii, jj, kk = np.meshgrid(np.arange(nx), np.arange(ny), np.arange(nz), indexing="ij")
    pts = origin + np.stack([ii.ravel(), jj.ravel(), kk.ravel()], axis=1) * res

    sentinel = 2.0 * res
    sdf = design.sdf_many(pts)
    interior = np.nonzero(sdf <= 0.0)[0]
    seg_of = np.full(len(pts), -1, dtype=np.int64)
    if interior.size:
        fracs = design.fractions_many(pts[interior])
        ref = fracs.get(spec.reference_material)
        if ref is None:
            ref = np.zeros(interior.size)
        else:
            ref = np.clip(ref, 0.0, 1.0)
        seg_of[interior] = spec.range_index(ref)

    values = []
    for s in range(spec.count):
        v = np.full(len(pts), sentinel)
        mine = seg_of == s
        v[mine] = sdf[mine]
        # keep true positive distances near my voxels so crossings interpolate
        near = (~mine) & (sdf > 0.0)
        v[near] = np.minimum(sdf[near], sentinel)
        values.append(v.reshape(nx, ny, nz))
    return SegmentGrids(
        origin=origin,
        spacing=res,
        values=values,
        interior_segment=seg_of.reshape(nx, ny, nz),
    )


def marching_cubes(grid: np.ndarray, origin, spacing: float, iso: float = 0.0):
    """Classic 256-case marching cubes with linear edge interpolation.

    Expects node samples (negative inside). Returns (vertices, triangles);
    an all-positive grid yields empty arrays. Vertices are deduplicated per
    grid edge, so closed interiors produce 2-manifold surfaces.
    """
    g = np.asarray(grid, dtype=np.float64)
    nx, ny, nz = g.shape
    inside = g < iso
    if not inside.any():
        return np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int64)

    case = np.zeros((nx - 1, ny - 1, nz - 1), dtype=np.int32)
    for c, (dx, dy, dz) in enumerate(_CORNER_OFFSETS):
        case |= inside[dx : nx - 1 + dx, dy : ny - 1 + dy, dz : nz - 1 + dz] << c
    active = np.nonzero((case != 0) & (case != 255))
    cases = case[active]
    ci, cj, ck = (a.astype(np.int64) for a in active)

    # Unique vertex per crossed grid edge: key = (corner node, axis).
    edge_masks = EDGE_TABLE[cases]
    cell_edge_vert = np.full((len(cases), 12), -1, dtype=np.int64)
    all_keys: list[np.ndarray] = []
    all_pos: list[np.ndarray] = []
    all_rows: list[np.ndarray] = []
    all_e: list[int] = []

    for e in range(12):
        rows = np.nonzero(edge_masks & (1 << e))[0]
        if rows.size == 0:
            continue
        ax = int(_EDGE_ANCHOR[e, 3])
        i0 = ci[rows] + _EDGE_ANCHOR[e, 0]
        j0 = cj[rows] + _EDGE_ANCHOR[e, 1]
        k0 = ck[rows] + _EDGE_ANCHOR[e, 2]
        ends = [i0.copy(), j0.copy(), k0.copy()]
        ends[ax] += 1
        v0 = g[i0, j0, k0]
        v1 = g[ends[0], ends[1], ends[2]]
        t = np.clip((iso - v0) / np.where(v1 != v0, v1 - v0, 1.0), 0.0, 1.0)
        base = np.stack([i0, j0, k0], axis=1).astype(np.float64)
        base[:, ax] += t
        all_pos.append(np.asarray(origin) + base * spacing)
        all_keys.append((((i0 * ny + j0) * nz + k0) * 3 + ax))
        all_rows.append(rows)
        all_e.append(e)

    keys = np.concatenate(all_keys)
    uniq, first, inverse = np.unique(keys, return_index=True, return_inverse=True)
    vertices = np.concatenate(all_pos)[first]
    offset = 0
    for rows, e in zip(all_rows, all_e):
        cell_edge_vert[rows, e] = inverse[offset : offset + rows.size]
        offset += rows.size

    tris: list[tuple[int, int, int]] = []
    tri_rows = TRI_TABLE[cases]
    for r in range(len(cases)):
        row = tri_rows[r]
        ev = cell_edge_vert[r]
        for t in range(0, 16, 3):
            if row[t] < 0:
                break
            tris.append((ev[row[t]], ev[row[t + 1]], ev[row[t + 2]]))

    triangles = np.array(tris, dtype=np.int64)
    # The standard table winds triangles with inward normals for
    # negative-inside fields; flip for outward orientation.
    triangles = triangles[:, [0, 2, 1]]
    return vertices, triangles


def export_meshes(
    design: DesignNode,
    spec: SegmentationSpec,
    materials: MaterialTable,
    out_dir,
    workers: int | None = None,
) -> dict:
    """Write one binary STL per fraction range plus a manifest."""
    os.makedirs(out_dir, exist_ok=True)
    grids = sample_segmented_grids(design, spec)
    workers = workers or os.cpu_count() or 1

    def do_segment(s: int):
        verts, tris = marching_cubes(grids.values[s], grids.origin, grids.spacing)
        name = f"segment_{s}.stl"
        write_stl(os.path.join(out_dir, name), verts, tris)
        return name, len(tris)

    if workers > 1 and spec.count > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(do_segment, range(spec.count)))
    else:
        results = [do_segment(s) for s in range(spec.count)]

    ref = spec.reference_material
    manifest = {
        "reference_material": {"id": ref, "name": materials[ref].name if ref < len(materials) else None},
        "resolution_mm": spec.resolution,
        "segments": [
            {
                "file": fname,
                "fraction_range": list(spec.ranges[s]),
                "triangles": ntris,
                "suggested_slicer_parameter": 0.5 * (spec.ranges[s][0] + spec.ranges[s][1]),
            }
            for s, (fname, ntris) in enumerate(results)
        ],
    }
    with open(os.path.join(out_dir, MANIFEST_NAME), "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
    return manifest
