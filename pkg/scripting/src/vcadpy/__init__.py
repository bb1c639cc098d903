"""vcadpy: script-friendly constructors for vcadc design trees.

Handles buffer a JSON fragment per node; ``to_json``/``save`` emit the
vcadc interchange document and ``build`` materializes a core node (through
the JSON boundary when possible, or directly for trees carrying Python
callback expressions, which the interchange cannot represent). Constructor
arity and type errors surface at call time.

Typical use::

    import vcadpy as pv

    materials = pv.default_materials()
    bar = pv.RectPrism(pv.Vec3(0, 0, 0), pv.Vec3(15, 10, 5), materials.id("gray"))
    root = pv.FGrade(["x/15+0.5", "-x/15+0.5"],
                     [materials.id("red"), materials.id("blue")], True, bar)
    root.save("bar.json", materials)
"""

from __future__ import annotations

import json
from collections import namedtuple

import vcadc
from vcadc import DesignError, LatticeType, default_materials
from vcadc.lattice import GradeScope, grade_lattice, topology_edges

__all__ = [
    "Vec3", "default_materials", "LatticeType", "GradeScope",
    "Sphere", "RectPrism", "Strut", "Union", "Intersection", "Difference",
    "Transform", "FGrade", "Tile", "GraphLattice", "SimulationField",
    "MeshImport", "NodeHandle", "grade_lattice", "topology_edges",
]

__version__ = "0.1.0"

Vec3 = namedtuple("Vec3", ["x", "y", "z"])


def _vec(v, what: str) -> list[float]:
    try:
        x, y, z = v
        return [float(x), float(y), float(z)]
    except (TypeError, ValueError):
        raise DesignError(f"{what} must be a 3-vector, got {v!r}") from None


def _material(m, what: str = "material"):
    if m is None:
        return None
    if isinstance(m, bool) or not isinstance(m, int):
        raise DesignError(f"{what} must be an integer material id, got {m!r}")
    return m


class NodeHandle:
    """A buffered design node: kind, params, children."""

    _GROWABLE = ("union", "intersection")

    def __init__(self, kind: str, params: dict, children: list["NodeHandle"] | None = None):
        self.kind = kind
        self.params = params
        self.children = list(children or [])
        for c in self.children:
            if not isinstance(c, NodeHandle):
                raise DesignError(f"{kind} children must be design nodes, got {type(c).__name__}")
        self._built = None

    def add_child(self, child: "NodeHandle") -> "NodeHandle":
        if self.kind not in self._GROWABLE:
            raise DesignError(f"{self.kind} does not take additional children")
        if not isinstance(child, NodeHandle):
            raise DesignError(f"child must be a design node, got {type(child).__name__}")
        self.children.append(child)
        self._built = None
        return self

    # -- serialization -------------------------------------------------------

    def has_callbacks(self) -> bool:
        if any(callable(e) for e in self.params.get("expressions", []) or []):
            return True
        return any(c.has_callbacks() for c in self.children)

    def fragment(self) -> dict:
        if any(callable(e) for e in self.params.get("expressions", []) or []):
            raise DesignError(
                "callback expressions cannot be serialized; use math strings"
            )
        return {
            "kind": self.kind,
            "params": dict(self.params),
            "children": [c.fragment() for c in self.children],
        }

    def to_json(self, materials=None, indent: int = 2) -> bytes:
        doc = {"vcad_version": 1, "root": self.fragment()}
        if materials is not None:
            doc["materials"] = [
                {"id": m.id, "name": m.name, "color": list(m.color)} for m in materials
            ]
        return json.dumps(doc, indent=indent).encode()

    def save(self, path, materials=None) -> None:
        with open(path, "wb") as f:
            f.write(self.to_json(materials))

    # -- evaluation through the core ------------------------------------------

    def build(self, base_dir: str | None = None):
        """Materialize a core DesignNode (cached)."""
        if self._built is None:
            if self.has_callbacks():
                self._built = self._build_native()
            else:
                self._built = vcadc.from_json(self.to_json(), base_dir=base_dir).root
        return self._built

    def _build_native(self):
        kids = [c._build_native() for c in self.children]
        p = self.params
        if self.kind == "sphere":
            return vcadc.Sphere(p["center"], p["radius"], p["material"])
        if self.kind == "rect_prism":
            return vcadc.RectPrism(p["center"], p["dims"], p["material"])
        if self.kind == "strut":
            return vcadc.Strut(p["a"], p["b"], p["diameter"], p["material"])
        if self.kind == "union":
            return vcadc.Union(kids, smooth=p["smooth"])
        if self.kind == "intersection":
            return vcadc.Intersection(kids, smooth=p["smooth"])
        if self.kind == "difference":
            return vcadc.Difference(*kids)
        if self.kind == "transform":
            return vcadc.Transform(p["matrix"], kids[0])
        if self.kind == "tile":
            return vcadc.Tile(kids[0], p.get("period"))
        if self.kind == "fgrade":
            return vcadc.FGrade(p["expressions"], p["materials"], p["probabilistic"], kids[0])
        if self.kind == "graph_lattice":
            if p.get("topology") is not None:
                return vcadc.GraphLattice(
                    LatticeType(p["topology"]), p["cell_size"], p["diameter"], p["material"]
                )
            return vcadc.GraphLattice.from_edges(p["edges"], p["diameter"], p["material"])
        if self.kind == "simulation_field":
            return vcadc.SimulationField(
                p["inp_path"], p["csv_path"], p["expressions"], p["materials"],
                p.get("grid_resolution", 0.1),
            )
        if self.kind == "mesh_import":
            return vcadc.MeshImport(p["mesh_path"], p["material"], p.get("grid_resolution", 0.1))
        raise DesignError(f"cannot build node kind {self.kind!r}")

    def sdf(self, p) -> float:
        return self.build().sdf(p)

    def fractions(self, p):
        return self.build().fractions(p)

    def __repr__(self) -> str:
        return f"<{self.kind} node ({len(self.children)} children)>"


# --- constructors -----------------------------------------------------------


def Sphere(center, radius, material=None) -> NodeHandle:
    radius = float(radius)
    if radius <= 0:
        raise DesignError(f"sphere radius must be > 0, got {radius}")
    return NodeHandle(
        "sphere",
        {"center": _vec(center, "center"), "radius": radius, "material": _material(material)},
    )


def RectPrism(center, dimensions, material=None) -> NodeHandle:
    dims = _vec(dimensions, "dimensions")
    if any(d <= 0 for d in dims):
        raise DesignError(f"dimensions must be > 0, got {dimensions!r}")
    return NodeHandle(
        "rect_prism",
        {"center": _vec(center, "center"), "dims": dims, "material": _material(material)},
    )


def Strut(a, b, diameter, material=None) -> NodeHandle:
    a = _vec(a, "a")
    b = _vec(b, "b")
    if a == b:
        raise DesignError("strut endpoints must differ")
    diameter = float(diameter)
    if diameter <= 0:
        raise DesignError(f"strut diameter must be > 0, got {diameter}")
    return NodeHandle(
        "strut", {"a": a, "b": b, "diameter": diameter, "material": _material(material)}
    )


def Union(children=None, smooth: bool = False) -> NodeHandle:
    return NodeHandle("union", {"smooth": bool(smooth)}, list(children or []))


def Intersection(smooth, children) -> NodeHandle:
    if not isinstance(smooth, bool):
        raise DesignError(f"the first Intersection argument is the smooth flag, got {smooth!r}")
    children = list(children)
    if not children:
        raise DesignError("intersection requires at least one child")
    return NodeHandle("intersection", {"smooth": smooth}, children)


def Difference(a, b) -> NodeHandle:
    return NodeHandle("difference", {}, [a, b])


def Transform(matrix, child) -> NodeHandle:
    m = [[float(v) for v in row] for row in matrix]
    if len(m) != 4 or any(len(row) != 4 for row in m):
        raise DesignError("transform matrix must be 4x4")
    return NodeHandle("transform", {"matrix": m}, [child])


def FGrade(expressions, materials, probabilistic, child) -> NodeHandle:
    expressions = list(expressions)
    materials = [_material(m, "materials entry") for m in materials]
    if len(expressions) != len(materials):
        raise DesignError(
            f"FGrade needs one expression per material: "
            f"{len(expressions)} expressions vs {len(materials)} materials"
        )
    if not expressions:
        raise DesignError("FGrade needs at least one expression")
    for e in expressions:
        if not (isinstance(e, str) or callable(e)):
            raise DesignError(f"expressions must be strings or callables, got {type(e).__name__}")
    return NodeHandle(
        "fgrade",
        {"expressions": expressions, "materials": materials, "probabilistic": bool(probabilistic)},
        [child],
    )


def Tile(child, period=None) -> NodeHandle:
    params = {}
    if period is not None:
        params["period"] = _vec(period, "period")
        if any(v <= 0 for v in params["period"]):
            raise DesignError(f"tile period must be > 0, got {period!r}")
    return NodeHandle("tile", params, [child])


def GraphLattice(cell_type=None, cell_size=None, strut_diameter=1.0, material=None, *, edges=None) -> NodeHandle:
    diameter = float(strut_diameter)
    if diameter <= 0:
        raise DesignError(f"strut diameter must be > 0, got {strut_diameter}")
    params = {"diameter": diameter, "material": _material(material)}
    if edges is not None:
        if cell_type is not None:
            raise DesignError("pass either a cell type or explicit edges, not both")
        edges = [[_vec(a, "edge endpoint"), _vec(b, "edge endpoint")] for a, b in edges]
        if not edges:
            raise DesignError("edge list is empty")
        params["edges"] = edges
    else:
        if not isinstance(cell_type, LatticeType):
            raise DesignError(f"cell type must be a LatticeType, got {cell_type!r}")
        size = _vec(cell_size, "cell size")
        if diameter >= min(size):
            raise DesignError(
                f"strut diameter {diameter} must be smaller than the narrowest cell dimension"
            )
        params["topology"] = cell_type.value
        params["cell_size"] = size
    return NodeHandle("graph_lattice", params)


def SimulationField(inp_path, point_map_path, expressions, materials, grid_resolution: float = 0.1) -> NodeHandle:
    expressions = [str(e) for e in expressions]
    materials = [_material(m, "materials entry") for m in materials]
    if len(expressions) != len(materials):
        raise DesignError(
            f"SimulationField needs one expression per material: "
            f"{len(expressions)} expressions vs {len(materials)} materials"
        )
    return NodeHandle(
        "simulation_field",
        {
            "inp_path": str(inp_path),
            "csv_path": str(point_map_path),
            "expressions": expressions,
            "materials": materials,
            "grid_resolution": float(grid_resolution),
        },
    )


def MeshImport(mesh_path, material=None, grid_resolution: float = 0.1) -> NodeHandle:
    return NodeHandle(
        "mesh_import",
        {
            "mesh_path": str(mesh_path),
            "material": _material(material),
            "grid_resolution": float(grid_resolution),
        },
    )
