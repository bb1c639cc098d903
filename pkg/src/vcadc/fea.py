"""Export designs to simulation-ready meshes.

Brick export samples a structured grid and keeps the cells whose centers
are inside. Tet export refines an octree until each leaf is no larger than
a sizing field driven by the local material heterogeneity h: the uniform
mixture (h=0) gets the finest elements and pure material (h=1) the
coarsest, so discretization effort concentrates where materials
interleave. Every element receives a single discrete material, drawn at
its centroid with fraction-weighted probabilities from a counter-based
hash, so meshes are reproducible for a fixed seed.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import DesignError, UnboundedDesignError
from .expr import parse
from .hashing import uniform_from_index
from .inp import BrickMesh, TetMesh
from .materials import FractionSet
from .nodes import DesignNode

log = logging.getLogger(__name__)

ELEMENT_CAP = 50_000_000
MAX_OCTREE_DEPTH = 12


def used_materials(design: DesignNode) -> set[int]:
    """Material ids referenced anywhere in a design tree."""
    out: set[int] = set()
    stack = [design]
    while stack:
        node = stack.pop()
        stack.extend(node.children)
        m = getattr(node, "material", None)
        if m is not None:
            out.add(int(m))
        for m in getattr(node, "materials", ()):
            out.add(int(m))
    return out


def heterogeneity(fractions, n_materials: int) -> float:
    """Deviation of the local mixture from uniform, in [0, 1].

    0 is the uniform mixture over ``n_materials``; 1 is a single pure
    material. Material ids absent from ``fractions`` count as 0.
    """
    if n_materials < 2:
        raise DesignError("heterogeneity needs at least 2 materials")
    if isinstance(fractions, FractionSet):
        vals = list(fractions.values())
    elif isinstance(fractions, dict):
        vals = [float(v) for v in fractions.values()]
    else:
        vals = [float(v) for v in fractions]
    if len(vals) > n_materials:
        raise DesignError(f"{len(vals)} fractions for {n_materials} materials")
    inv = 1.0 / n_materials
    sq = sum((f - inv) ** 2 for f in vals) + (n_materials - len(vals)) * inv * inv
    return math.sqrt(sq) / math.sqrt(1.0 - inv)


def _heterogeneity_field(field: dict[int, np.ndarray], n_materials: int, n: int) -> np.ndarray:
    inv = 1.0 / n_materials
    listed = len(field)
    sq = np.full(n, (n_materials - listed) * inv * inv)
    for vals in field.values():
        sq += (vals - inv) ** 2
    return np.sqrt(sq) / math.sqrt(1.0 - inv)


@dataclass
class SizingField:
    """Element-size control: h in [0,1] maps to a cell edge length in mm.

    The default map is linear from min_cell (h=0) to max_cell (h=1); a
    custom expression over the variable ``h`` may replace it, with results
    clamped into [min_cell, max_cell].
    """

    min_cell: float
    max_cell: float
    expression: str | None = None

    def __post_init__(self):
        if not (0 < self.min_cell <= self.max_cell):
            raise DesignError(
                f"need 0 < min_cell <= max_cell, got {self.min_cell}, {self.max_cell}"
            )
        self._program = None if self.expression is None else parse(self.expression)
        self._clamp_warned = False

    def cell_size(self, h):
        h = np.asarray(h, dtype=np.float64)
        if self._program is None:
            out = self.min_cell + h * (self.max_cell - self.min_cell)
        else:
            out = np.asarray(self._program.eval({"h": h}), dtype=np.float64)
            clipped = (out < self.min_cell) | (out > self.max_cell)
            if clipped.any() and not self._clamp_warned:
                log.warning(
                    "sizing expression left [min_cell, max_cell] for %d probes; clamping",
                    int(clipped.sum()),
                )
                self._clamp_warned = True
            out = np.clip(out, self.min_cell, self.max_cell)
        return out if out.ndim else float(out)


def cell_size(h, sizing: SizingField):
    return sizing.cell_size(h)


def _draw_materials(design: DesignNode, centroids: np.ndarray, counters: np.ndarray, seed: int, n_materials: int) -> np.ndarray:
    """Probabilistic per-element material from fractions at centroids."""
    field = design.fractions_many(centroids)
    n = len(centroids)
    if not field:
        return np.zeros(n, dtype=np.int64)
    ids = np.array(sorted(field), dtype=np.int64)
    fracs = np.stack([field[int(m)] for m in ids])
    total = fracs.sum(axis=0)
    u = uniform_from_index(counters, seed) * np.where(total > 0, total, 1.0)
    pick = np.minimum((u[None, :] >= np.cumsum(fracs, axis=0)).sum(axis=0), len(ids) - 1)
    out = ids[pick]
    out[total <= 0] = ids[0]
    return out


def export_bricks(
    design: DesignNode,
    resolution: float,
    seed: int = 0,
    element_cap: int = ELEMENT_CAP,
) -> BrickMesh:
    """Uniform C3D8R grid over the design bounds.

    An element is kept iff the signed distance at its center is <= 0.
    """
    resolution = float(resolution)
    if resolution <= 0:
        raise DesignError(f"resolution must be > 0, got {resolution}")
    bounds = design.bounds()
    counts = np.maximum(np.ceil(bounds.size / resolution - 1e-9).astype(np.int64), 1)
    nx, ny, nz = (int(c) for c in counts)
    total = nx * ny * nz
    if total > element_cap:
        raise DesignError(
            f"grid of {total} elements exceeds the cap of {element_cap}; "
            f"coarsen the resolution or raise element_cap"
        )

    ii, jj, kk = np.meshgrid(np.arange(nx), np.arange(ny), np.arange(nz), indexing="ij")
    ii, jj, kk = ii.ravel(), jj.ravel(), kk.ravel()
    centers = bounds.min + (np.stack([ii, jj, kk], axis=1) + 0.5) * resolution
    keep = np.nonzero(design.sdf_many(centers) <= 0.0)[0]
    if keep.size == 0:
        raise DesignError("no elements: the design has no interior at this resolution")

    ei, ej, ek = ii[keep], jj[keep], kk[keep]
    # Corner node grid ids; C3D8 order: bottom face CCW, then top face.
    def node_id(di, dj, dk):
        return ((ei + di) * (ny + 1) + (ej + dj)) * (nz + 1) + (ek + dk)

    conn = np.stack(
        [
            node_id(0, 0, 0), node_id(1, 0, 0), node_id(1, 1, 0), node_id(0, 1, 0),
            node_id(0, 0, 1), node_id(1, 0, 1), node_id(1, 1, 1), node_id(0, 1, 1),
        ],
        axis=1,
    )
    used, conn_local = np.unique(conn, return_inverse=True)
    conn_local = conn_local.reshape(conn.shape)
    gk = used % (nz + 1)
    gj = (used // (nz + 1)) % (ny + 1)
    gi = used // ((ny + 1) * (nz + 1))
    coords = bounds.min + np.stack([gi, gj, gk], axis=1) * resolution

    n_mats = max(2, len(used_materials(design)))
    material = _draw_materials(design, centers[keep], keep, seed, n_mats)

    return BrickMesh(
        node_ids=np.arange(1, len(used) + 1, dtype=np.int64),
        coords=coords,
        element_ids=np.arange(1, keep.size + 1, dtype=np.int64),
        elements=conn_local.astype(np.int64),
        element_type="C3D8R",
        material=material,
    )


# ---------------------------------------------------------------------------
# Adaptive tetrahedral export

_FACE_DIRS = [(-1, 0, 0), (1, 0, 0), (0, -1, 0), (0, 1, 0), (0, 0, -1), (0, 0, 1)]
_EDGE_DIRS = [
    (a, b, 0) for a in (-1, 1) for b in (-1, 1)
] + [(a, 0, b) for a in (-1, 1) for b in (-1, 1)] + [(0, a, b) for a in (-1, 1) for b in (-1, 1)]


class _Octree:
    """2:1 balanced octree over a bounding box, sized by a target field."""

    def __init__(self, design: DesignNode, sizing: SizingField, n_materials: int):
        self.bounds = design.bounds()
        self.design = design
        self.sizing = sizing
        self.n_materials = n_materials
        max_extent = float(np.max(self.bounds.size))
        depth_needed = max(0, math.ceil(math.log2(max(max_extent / sizing.min_cell, 1.0))))
        self.max_depth = min(depth_needed, MAX_OCTREE_DEPTH)
        if depth_needed > MAX_OCTREE_DEPTH:
            log.warning(
                "min_cell %.4g needs octree depth %d; capping at %d",
                sizing.min_cell, depth_needed, MAX_OCTREE_DEPTH,
            )
        self.leaves: set[tuple[int, int, int, int]] = set()
        self._refine()
        self._balance()

    def cell_extent(self, level: int) -> np.ndarray:
        return self.bounds.size / (1 << level)

    def centers(self, cells: list[tuple[int, int, int, int]]) -> np.ndarray:
        out = np.empty((len(cells), 3))
        for r, (l, i, j, k) in enumerate(cells):
            out[r] = self.bounds.min + (np.array([i, j, k]) + 0.5) * self.cell_extent(l)
        return out

    def _target_sizes(self, cells) -> np.ndarray:
        centers = self.centers(cells)
        field = self.design.fractions_many(centers)
        h = _heterogeneity_field(field, self.n_materials, len(cells))
        return np.asarray(self.sizing.cell_size(h))

    def _refine(self):
        frontier = [(0, 0, 0, 0)]
        while frontier:
            cells = frontier
            frontier = []
            centers = self.centers(cells)
            sdf = self.design.sdf_many(centers)
            targets = self._target_sizes(cells)
            for idx, cell in enumerate(cells):
                l = cell[0]
                extent = self.cell_extent(l)
                half_diag = 0.5 * float(np.linalg.norm(extent))
                wholly_outside = sdf[idx] > half_diag
                needs = float(np.max(extent)) > targets[idx] and l < self.max_depth
                if needs and not wholly_outside:
                    for c in self._children(cell):
                        frontier.append(c)
                else:
                    self.leaves.add(cell)

    @staticmethod
    def _children(cell):
        l, i, j, k = cell
        return [
            (l + 1, 2 * i + di, 2 * j + dj, 2 * k + dk)
            for di in (0, 1) for dj in (0, 1) for dk in (0, 1)
        ]

    def find_cover(self, level: int, i: int, j: int, k: int):
        """The leaf covering cell (level, i, j, k), or None if subdivided finer."""
        if not (0 <= i < (1 << level) and 0 <= j < (1 << level) and 0 <= k < (1 << level)):
            return None
        l, ci, cj, ck = level, i, j, k
        while l >= 0:
            if (l, ci, cj, ck) in self.leaves:
                return (l, ci, cj, ck)
            ci >>= 1
            cj >>= 1
            ck >>= 1
            l -= 1
        return None

    def _balance(self):
        # Split until no leaf differs by more than one level from any leaf
        # sharing a face or an edge; edge balance keeps hanging nodes at
        # facet-edge midpoints only, which the templates can absorb.
        changed = True
        while changed:
            changed = False
            for cell in sorted(self.leaves):
                l, i, j, k = cell
                for d in _FACE_DIRS + _EDGE_DIRS:
                    cover = self.find_cover(l, i + d[0], j + d[1], k + d[2])
                    if cover is not None and l - cover[0] > 1:
                        self.leaves.remove(cover)
                        self.leaves.update(self._children(cover))
                        changed = True
        self.max_level = max(c[0] for c in self.leaves)


def _tetrahedralize(tree: _Octree) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Conforming tets from a balanced octree.

    Every leaf contributes tets joining its center to a fan triangulation
    of each boundary facet. A facet is the shared face at the finer of the
    two adjacent levels, triangulated around its center point with facet
    edges split wherever a finer neighbor contributes a midpoint node; both
    sides derive the identical triangulation, so shared faces match
    exactly. Returns (node_keys, tets, leaf_level_per_tet) with vertices as
    packed integer grid keys at half-cell granularity of the finest level.
    """
    shift = tree.max_level + 1

    def pack(x, y, z):
        return (x << 42) | (y << 21) | z

    # Corner keys of all leaves, for hanging-midpoint detection.
    corner_keys = set()
    leaf_corner_cache = {}
    for l, i, j, k in tree.leaves:
        step = 1 << (shift - l)
        x0, y0, z0 = i * step, j * step, k * step
        cs = [
            (x0 + dx, y0 + dy, z0 + dz)
            for dx in (0, step) for dy in (0, step) for dz in (0, step)
        ]
        leaf_corner_cache[(l, i, j, k)] = (x0, y0, z0, step)
        for c in cs:
            corner_keys.add(pack(*c))

    tets: list[tuple[int, int, int, int]] = []
    tet_levels: list[int] = []

    def facet_tets(center_key, cx, cy, cz, corners, level):
        """Fan a square facet (corner list in cyclic order) about its center."""
        fc = (
            (corners[0][0] + corners[2][0]) // 2,
            (corners[0][1] + corners[2][1]) // 2,
            (corners[0][2] + corners[2][2]) // 2,
        )
        fc_key = pack(*fc)
        for e in range(4):
            a = corners[e]
            b = corners[(e + 1) % 4]
            mid = ((a[0] + b[0]) // 2, (a[1] + b[1]) // 2, (a[2] + b[2]) // 2)
            mid_key = pack(*mid)
            if mid_key in corner_keys:
                segments = [(a, mid), (mid, b)]
            else:
                segments = [(a, b)]
            for p, q in segments:
                # Orient for positive volume via the integer determinant.
                m = np.array(
                    [
                        [fc[0] - cx, fc[1] - cy, fc[2] - cz],
                        [p[0] - cx, p[1] - cy, p[2] - cz],
                        [q[0] - cx, q[1] - cy, q[2] - cz],
                    ],
                    dtype=np.int64,
                )
                det = int(np.linalg.det(m.astype(np.float64)))
                if det > 0:
                    tets.append((center_key, fc_key, pack(*p), pack(*q)))
                else:
                    tets.append((center_key, fc_key, pack(*q), pack(*p)))
                tet_levels.append(level)

    for cell in sorted(tree.leaves):
        l, i, j, k = cell
        x0, y0, z0, step = leaf_corner_cache[cell]
        half = step // 2
        cx, cy, cz = x0 + half, y0 + half, z0 + half
        center_key = pack(cx, cy, cz)
        for axis in range(3):
            for side in (0, 1):
                d = [0, 0, 0]
                d[axis] = -1 if side == 0 else 1
                # cover None means either out of domain (boundary: whole
                # facet) or a finer neighbor (split into quarter facets).
                cover = tree.find_cover(l, i + d[0], j + d[1], k + d[2])
                ni, nj, nk = i + d[0], j + d[1], k + d[2]
                in_domain = 0 <= ni < (1 << l) and 0 <= nj < (1 << l) and 0 <= nk < (1 << l)
                split = in_domain and cover is None

                u, v = [ax for ax in range(3) if ax != axis]
                base = [x0, y0, z0]
                base[axis] += 0 if side == 0 else step

                def face_point(du, dv):
                    p = list(base)
                    p[u] += du
                    p[v] += dv
                    return tuple(p)

                if not split:
                    corners = [
                        face_point(0, 0),
                        face_point(step, 0),
                        face_point(step, step),
                        face_point(0, step),
                    ]
                    facet_tets(center_key, cx, cy, cz, corners, l)
                else:
                    for qu in (0, half):
                        for qv in (0, half):
                            corners = [
                                face_point(qu, qv),
                                face_point(qu + half, qv),
                                face_point(qu + half, qv + half),
                                face_point(qu, qv + half),
                            ]
                            facet_tets(center_key, cx, cy, cz, corners, l)

    keys = np.unique(np.array([v for tet in tets for v in tet], dtype=np.int64))
    index = {int(kk): n for n, kk in enumerate(keys)}
    conn = np.array([[index[v] for v in tet] for tet in tets], dtype=np.int64)
    return keys, conn, np.array(tet_levels, dtype=np.int64)


def export_tets(design: DesignNode, sizing: SizingField, seed: int = 0) -> TetMesh:
    """Adaptive C3D4 mesh sized by local material heterogeneity.

    Tets are kept iff their centroid is inside; mesh vertices on the kept
    boundary that lie within one leaf diagonal of the surface are snapped
    onto it along the numerical SDF gradient, and any tets that degenerate
    in the process are discarded (count logged).
    """
    n_mats = max(2, len(used_materials(design)))
    tree = _Octree(design, sizing, n_mats)
    keys, conn, tet_levels = _tetrahedralize(tree)

    shift = tree.max_level + 1
    mask = (1 << 21) - 1
    unit = tree.bounds.size / (1 << shift)
    xi = ((keys >> 42) & mask).astype(np.float64)
    yi = ((keys >> 21) & mask).astype(np.float64)
    zi = (keys & mask).astype(np.float64)
    coords = tree.bounds.min + np.stack([xi, yi, zi], axis=1) * unit

    centroids = coords[conn].mean(axis=1)
    keep = np.nonzero(design.sdf_many(centroids) <= 0.0)[0]
    if keep.size == 0:
        raise DesignError("no elements: the design has no interior at this sizing")
    conn = conn[keep]
    tet_levels = tet_levels[keep]

    # Snap near-surface boundary vertices onto the zero level set.
    faces = conn[:, [[0, 2, 1], [0, 1, 3], [1, 2, 3], [0, 3, 2]]].reshape(-1, 3)
    key_faces = np.sort(faces, axis=1)
    _, first, counts = np.unique(key_faces, axis=0, return_index=True, return_counts=True)
    boundary_verts = np.unique(faces[first[counts == 1]])
    leaf_diag = float(np.linalg.norm(tree.cell_extent(0))) / (1 << tet_levels).astype(np.float64)
    vert_diag = np.full(len(coords), np.inf)
    for corner in range(4):
        np.minimum.at(vert_diag, conn[:, corner], leaf_diag)

    v = coords[boundary_verts]
    d = design.sdf_many(v)
    near = np.abs(d) <= vert_diag[boundary_verts]
    move = boundary_verts[near]
    if move.size:
        eps = max(float(sizing.min_cell) * 1e-3, 1e-9)
        p = coords[move]
        for _ in range(2):
            d = design.sdf_many(p)
            grad = np.empty_like(p)
            for ax in range(3):
                dp = np.zeros(3)
                dp[ax] = eps
                grad[:, ax] = (design.sdf_many(p + dp) - design.sdf_many(p - dp)) / (2 * eps)
            norm2 = np.einsum("nd,nd->n", grad, grad)
            step = d[:, None] * grad / np.maximum(norm2, 1e-30)[:, None]
            limit = vert_diag[move][:, None]
            p = p - np.clip(step, -limit, limit)
        coords[move] = p

    vols = np.linalg.det(coords[conn][:, 1:] - coords[conn][:, :1]) / 6.0
    min_vol = (sizing.min_cell ** 3) * 1e-9
    good = vols > min_vol
    discarded = int((~good).sum())
    if discarded:
        log.warning("discarded %d degenerate tets after surface snapping", discarded)
    conn = conn[good]

    used, conn_local = np.unique(conn, return_inverse=True)
    conn_local = conn_local.reshape(conn.shape).astype(np.int64)
    coords = coords[used]

    centroids = coords[conn_local].mean(axis=1)
    material = _draw_materials(design, centroids, np.arange(len(conn_local)), seed, n_mats)

    mesh = TetMesh(
        node_ids=np.arange(1, len(coords) + 1, dtype=np.int64),
        coords=coords,
        element_ids=np.arange(1, len(conn_local) + 1, dtype=np.int64),
        elements=conn_local,
        element_type="C3D4",
        material=material,
    )
    mesh.discarded_degenerate = discarded
    return mesh
