"""Strut-based lattices.

A strut is a capsule: the set of points within half a diameter of a line
segment. Spherical end caps give an exact closed-form distance and clean
junctions where struts meet, at the cost of extending diameter/2 beyond
each endpoint. Graph lattices union many struts through an axis-aligned
bounding-box tree so a single query scales sub-linearly in strut count.
"""

from __future__ import annotations

import enum

import numpy as np

from .errors import DesignError
from .geom import BBox, as_vec3
from .materials import FractionSet
from .nodes import DesignNode, FGrade, Tile, Union


def _capsule_sdf(pts: np.ndarray, a: np.ndarray, b: np.ndarray, radius: float) -> np.ndarray:
    pa = pts - a
    ba = b - a
    t = np.clip((pa @ ba) / (ba @ ba), 0.0, 1.0)
    return np.linalg.norm(pa - np.outer(t, ba), axis=1) - radius


class Strut(DesignNode):
    """Cylindrical strut between two endpoints, capped at both ends."""

    kind = "strut"
    sdf_is_metric = True

    def __init__(self, a, b, diameter: float, material: int | None = None):
        self.a = as_vec3(a)
        self.b = as_vec3(b)
        if np.array_equal(self.a, self.b):
            raise DesignError("strut endpoints must differ")
        self.diameter = float(diameter)
        if self.diameter <= 0:
            raise DesignError(f"strut diameter must be > 0, got {diameter}")
        self.material = None if material is None else int(material)
        # evaluate against a canonical endpoint order so a<->b swaps are
        # bit-identical
        if tuple(self.a) <= tuple(self.b):
            self._ea, self._eb = self.a, self.b
        else:
            self._ea, self._eb = self.b, self.a

    def sdf_many(self, pts):
        return _capsule_sdf(pts, self._ea, self._eb, 0.5 * self.diameter)

    def bounds(self):
        r = 0.5 * self.diameter
        return BBox(np.minimum(self.a, self.b) - r, np.maximum(self.a, self.b) + r)

    def fractions_many(self, pts):
        if self.material is None:
            return {}
        return {self.material: np.ones(len(pts))}

    def fractions_at(self, p):
        return FractionSet() if self.material is None else FractionSet({self.material: 1.0})

    def _params(self):
        return (tuple(self.a), tuple(self.b), self.diameter, self.material)


class LatticeType(enum.Enum):
    SimpleCubic = "simple_cubic"
    BodyCenteredCubic = "bcc"
    FaceCenteredCubic = "fcc"
    Octet = "octet"


def topology_edges(topology: LatticeType, cell_size) -> list[tuple[np.ndarray, np.ndarray]]:
    """Vertex pairs of a named unit cell, centered at the origin.

    SimpleCubic: the 12 cube edges. BCC: 8 struts from each corner to the
    cell center. FCC: 24 half-face-diagonals (face center to each of its 4
    corners). Octet: FCC plus the 12 octahedron edges joining adjacent face
    centers. These edge tables are this package's convention; pass explicit
    vertex pairs to override.
    """
    cell = as_vec3(cell_size)
    if np.any(cell <= 0):
        raise DesignError(f"cell size must be > 0, got {cell_size}")
    hx, hy, hz = 0.5 * cell
    corners = np.array([[sx * hx, sy * hy, sz * hz] for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)])
    face_centers = np.array(
        [[-hx, 0, 0], [hx, 0, 0], [0, -hy, 0], [0, hy, 0], [0, 0, -hz], [0, 0, hz]]
    )
    edges: list[tuple[np.ndarray, np.ndarray]] = []

    if topology is LatticeType.SimpleCubic:
        for i in range(8):
            for j in range(i + 1, 8):
                if np.count_nonzero(corners[i] != corners[j]) == 1:
                    edges.append((corners[i], corners[j]))
    elif topology is LatticeType.BodyCenteredCubic:
        center = np.zeros(3)
        for c in corners:
            edges.append((c, center))
    elif topology in (LatticeType.FaceCenteredCubic, LatticeType.Octet):
        for f in face_centers:
            axis = int(np.nonzero(f)[0][0])
            for c in corners:
                if c[axis] == f[axis]:
                    edges.append((f, c))
        if topology is LatticeType.Octet:
            for i in range(6):
                for j in range(i + 1, 6):
                    if np.dot(face_centers[i], face_centers[j]) == 0:
                        edges.append((face_centers[i], face_centers[j]))
    else:
        raise DesignError(f"unknown lattice topology {topology!r}")
    return edges


class _StrutBvh:
    """Static AABB tree over strut capsules, leaf size 4.

    Queries run in two passes. A greedy descent routes every point to one
    leaf (always the nearer child box) to seed a tight upper bound, then a
    pruned sweep visits only nodes that could still lower it. The prune
    bound is box distance minus the capsule radius, which stays valid for
    points buried inside overlapping capsules, so the exact min-union is
    preserved.
    """

    LEAF_SIZE = 4

    def __init__(self, a: np.ndarray, b: np.ndarray, radius: float):
        n = len(a)
        lo = np.minimum(a, b) - radius
        hi = np.maximum(a, b) + radius
        centroids = 0.5 * (lo + hi)
        node_lo: list[np.ndarray] = []
        node_hi: list[np.ndarray] = []
        self.node_left: list[int] = []
        self.node_right: list[int] = []
        self.node_start: list[int] = []
        self.node_end: list[int] = []
        self.order = np.arange(n)
        self._build(0, n, lo, hi, centroids, node_lo, node_hi)
        self.lo = np.array(node_lo)
        self.hi = np.array(node_hi)
        self.radius = radius
        # Leaf struts stored contiguously in tree order for sliced gathers.
        self.a = a[self.order]
        self.b = b[self.order]

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

    def _box_dist(self, node: int, sub: np.ndarray) -> np.ndarray:
        d = np.maximum(self.lo[node] - sub, sub - self.hi[node])
        return np.linalg.norm(np.maximum(d, 0.0), axis=1)

    def _eval_leaf(self, node: int, sub: np.ndarray, acc: np.ndarray) -> np.ndarray:
        s, e = self.node_start[node], self.node_end[node]
        pa = sub[:, None, :] - self.a[s:e][None, :, :]
        ba = self.b[s:e] - self.a[s:e]
        t = np.clip(np.einsum("rkd,kd->rk", pa, ba) / np.einsum("kd,kd->k", ba, ba), 0.0, 1.0)
        d = np.linalg.norm(pa - t[:, :, None] * ba[None], axis=2).min(axis=1) - self.radius
        return np.minimum(acc, d)

    def min_distance(self, pts: np.ndarray) -> np.ndarray:
        n = len(pts)
        best = np.full(n, np.inf)
        # Pass 1: greedy descent to the nearest leaf box.
        frontier = [(0, np.arange(n))]
        while frontier:
            node, rows = frontier.pop()
            left, right = self.node_left[node], self.node_right[node]
            if left < 0:
                best[rows] = self._eval_leaf(node, pts[rows], best[rows])
                continue
            sub = pts[rows]
            go_left = self._box_dist(left, sub) <= self._box_dist(right, sub)
            if go_left.any():
                frontier.append((left, rows[go_left]))
            if not go_left.all():
                frontier.append((right, rows[~go_left]))
        # Pass 2: pruned sweep against the seeded bound.
        stack = [(0, np.arange(n))]
        while stack:
            node, rows = stack.pop()
            keep = self._box_dist(node, pts[rows]) - self.radius < best[rows]
            rows = rows[keep]
            if rows.size == 0:
                continue
            left = self.node_left[node]
            if left < 0:
                best[rows] = self._eval_leaf(node, pts[rows], best[rows])
            else:
                stack.append((self.node_right[node], rows))
                stack.append((left, rows))
        return best


class GraphLattice(DesignNode):
    """Union of struts defined by a named topology or an explicit edge list."""

    kind = "graph_lattice"
    sdf_is_metric = True

    def __init__(
        self,
        topology: LatticeType | None = None,
        cell_size=None,
        diameter: float = 1.0,
        material: int | None = None,
        *,
        edges=None,
    ):
        self.topology = topology
        self.cell_size = None if cell_size is None else as_vec3(cell_size)
        self.diameter = float(diameter)
        if self.diameter <= 0:
            raise DesignError(f"strut diameter must be > 0, got {diameter}")
        self.material = None if material is None else int(material)

        if topology is not None:
            if edges is not None:
                raise DesignError("pass either a topology or explicit edges, not both")
            if self.cell_size is None:
                raise DesignError("named topologies require a cell size")
            if self.diameter >= float(np.min(self.cell_size)):
                raise DesignError(
                    f"strut diameter {self.diameter} must be smaller than the "
                    f"narrowest cell dimension {float(np.min(self.cell_size))}"
                )
            edges = topology_edges(topology, self.cell_size)
        if edges is None:
            raise DesignError("graph lattice needs a topology or an edge list")
        pairs = [(as_vec3(a), as_vec3(b)) for a, b in edges]
        if not pairs:
            raise DesignError("graph lattice edge list is empty")
        for a, b in pairs:
            if np.array_equal(a, b):
                raise DesignError("lattice edge endpoints must differ")
        if topology is not None:
            half = 0.5 * self.cell_size + 1e-9
            for a, b in pairs:
                if np.any(np.abs(a) > half) or np.any(np.abs(b) > half):
                    raise DesignError("topology edge endpoints fall outside the cell")
        self._a = np.array([p[0] for p in pairs])
        self._b = np.array([p[1] for p in pairs])
        self._bvh = _StrutBvh(self._a, self._b, 0.5 * self.diameter)

    @classmethod
    def from_edges(cls, edges, diameter: float, material: int | None = None) -> "GraphLattice":
        return cls(diameter=diameter, material=material, edges=edges)

    @property
    def edges(self) -> list[tuple[np.ndarray, np.ndarray]]:
        return [(self._a[i].copy(), self._b[i].copy()) for i in range(len(self._a))]

    @property
    def strut_count(self) -> int:
        return len(self._a)

    def sdf_many(self, pts):
        return self._bvh.min_distance(pts)

    def bounds(self):
        r = 0.5 * self.diameter
        lo = np.minimum(self._a.min(axis=0), self._b.min(axis=0)) - r
        hi = np.maximum(self._a.max(axis=0), self._b.max(axis=0)) + r
        return BBox(lo, hi)

    def fractions_many(self, pts):
        if self.material is None:
            return {}
        return {self.material: np.ones(len(pts))}

    def fractions_at(self, p):
        return FractionSet() if self.material is None else FractionSet({self.material: 1.0})

    def _params(self):
        topo = None if self.topology is None else self.topology.value
        cell = None if self.cell_size is None else tuple(self.cell_size)
        edges = tuple((tuple(a), tuple(b)) for a, b in zip(self._a, self._b))
        return (topo, cell, edges, self.diameter, self.material)


class GradeScope(enum.Enum):
    Global = "global"
    PerCell = "per_cell"
    PerStrut = "per_strut"


def grade_lattice(
    scope: GradeScope,
    lattice: DesignNode,
    expressions,
    materials,
    *,
    probabilistic: bool = True,
    period=None,
) -> DesignNode:
    """Apply one of the three lattice grading strategies.

    Global tiles the lattice first and grades the whole structure in world
    coordinates. PerCell grades the unit cell and then tiles it, so the
    gradient repeats with the cell. PerStrut takes per-strut expression
    lists (one list of per-material expressions for each strut) and unions
    individually graded struts.
    """
    if scope is GradeScope.Global:
        return FGrade(expressions, materials, probabilistic, Tile(lattice, period))
    if scope is GradeScope.PerCell:
        return Tile(FGrade(expressions, materials, probabilistic, lattice), period)
    if scope is not GradeScope.PerStrut:
        raise DesignError(f"unknown grading scope {scope!r}")

    if not isinstance(lattice, GraphLattice):
        raise DesignError("per-strut grading requires a GraphLattice")
    n = lattice.strut_count
    if len(expressions) != n or any(isinstance(e, (str, bytes)) or callable(e) for e in expressions):
        raise DesignError(
            f"per-strut grading needs one expression list per strut "
            f"({n} struts, got {len(expressions)} entries)"
        )
    struts = []
    for i, (a, b) in enumerate(zip(lattice._a, lattice._b)):
        s = Strut(a, b, lattice.diameter, lattice.material)
        struts.append(FGrade(expressions[i], materials, probabilistic, s))
    return Union(struts)
