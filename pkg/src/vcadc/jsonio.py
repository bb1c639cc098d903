"""The JSON interchange format for design trees.

Document layout (lengths in mm)::

    {
      "vcad_version": 1,
      "materials": [{"id": 0, "name": "gray", "color": [r, g, b, a]}, ...],
      "root": {"kind": "...", "params": {...}, "children": [...]}
    }

``from_json(to_json(n))`` is a structural identity; floats are emitted via
repr so signed distances of a round-tripped tree are bit-identical.
Errors report the JSON path of the offending node. Relative file paths
inside nodes (simulation fields, mesh imports) resolve against
``base_dir`` when one is supplied.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from .errors import DesignError, DesignJsonError, ExprSyntaxError, VcadError
from .lattice import GraphLattice, LatticeType, Strut
from .materials import Material, MaterialTable
from .meshimport import MeshImport
from .nodes import (
    DesignNode,
    Difference,
    FGrade,
    Intersection,
    RectPrism,
    Sphere,
    Tile,
    Transform,
    Union,
)
from .simfield import SimulationField

VCAD_VERSION = 1


@dataclass
class DesignDocument:
    root: DesignNode
    materials: MaterialTable | None = None


def _vec(v) -> list[float]:
    return [float(c) for c in v]


def _encode(node: DesignNode) -> dict:
    kind = node.kind
    children = [_encode(c) for c in node.children]
    if isinstance(node, Sphere):
        params = {"center": _vec(node.center), "radius": node.radius, "material": node.material}
    elif isinstance(node, RectPrism):
        params = {"center": _vec(node.center), "dims": _vec(node.dims), "material": node.material}
    elif isinstance(node, Strut):
        params = {
            "a": _vec(node.a),
            "b": _vec(node.b),
            "diameter": node.diameter,
            "material": node.material,
        }
    elif isinstance(node, (Union, Intersection)):
        params = {"smooth": node.smooth}
    elif isinstance(node, Difference):
        params = {}
    elif isinstance(node, Transform):
        params = {"matrix": [_vec(row) for row in node.matrix]}
    elif isinstance(node, Tile):
        params = {"period": _vec(node.period)}
    elif isinstance(node, FGrade):
        if not node.serializable():
            raise DesignError(
                "callback expressions cannot be serialized; use math strings instead"
            )
        params = {
            "expressions": [p.source for p in node.programs],
            "materials": list(node.materials),
            "probabilistic": node.probabilistic,
        }
    elif isinstance(node, GraphLattice):
        params = {"diameter": node.diameter, "material": node.material}
        if node.topology is not None:
            params["topology"] = node.topology.value
            params["cell_size"] = _vec(node.cell_size)
        else:
            params["edges"] = [[_vec(a), _vec(b)] for a, b in node.edges]
    elif isinstance(node, SimulationField):
        if node.inp_path is None or node.csv_path is None:
            raise DesignError("only file-backed simulation fields can be serialized")
        params = {
            "inp_path": node.inp_path,
            "csv_path": node.csv_path,
            "expressions": [p.source for p in node.programs],
            "materials": list(node.materials),
            "grid_resolution": node.grid_resolution,
        }
    elif isinstance(node, MeshImport):
        if node.mesh_path is None:
            raise DesignError("only file-backed mesh imports can be serialized")
        params = {
            "mesh_path": node.mesh_path,
            "material": node.material,
            "grid_resolution": node.grid_resolution,
        }
    else:
        raise DesignError(f"cannot serialize node kind {kind!r}")
    return {"kind": kind, "params": params, "children": children}


def to_json(design: DesignNode | DesignDocument, materials: MaterialTable | None = None, indent: int = 2) -> bytes:
    if isinstance(design, DesignDocument):
        materials = design.materials if materials is None else materials
        design = design.root
    doc = {"vcad_version": VCAD_VERSION, "root": _encode(design)}
    if materials is not None:
        doc["materials"] = [
            {"id": m.id, "name": m.name, "color": list(m.color)} for m in materials
        ]
    return json.dumps(doc, indent=indent).encode()


def _expect(cond: bool, message: str, path: str):
    if not cond:
        raise DesignJsonError(message, path)


def _child_count(obj, lo: int, hi: int | None, path: str) -> list:
    kids = obj.get("children", [])
    _expect(isinstance(kids, list), "children must be a list", path)
    n = len(kids)
    if hi is None:
        _expect(n >= lo, f"expected at least {lo} children, got {n}", path)
    else:
        _expect(lo <= n <= hi, f"expected {lo}..{hi} children, got {n}", path)
    return kids


def _decode(obj, path: str, base_dir: str | None) -> DesignNode:
    _expect(isinstance(obj, dict), "node must be an object", path)
    kind = obj.get("kind")
    _expect(isinstance(kind, str), "node is missing its 'kind'", path)
    params = obj.get("params", {})
    _expect(isinstance(params, dict), "'params' must be an object", path)

    def children(lo, hi=None):
        kids = _child_count(obj, lo, hi, path)
        return [_decode(k, f"{path}.children[{i}]", base_dir) for i, k in enumerate(kids)]

    def resolve(p):
        if base_dir is not None and not os.path.isabs(p):
            return os.path.join(base_dir, p)
        return p

    try:
        if kind == "sphere":
            _child_count(obj, 0, 0, path)
            return Sphere(params["center"], params["radius"], params.get("material"))
        if kind == "rect_prism":
            _child_count(obj, 0, 0, path)
            return RectPrism(params["center"], params["dims"], params.get("material"))
        if kind == "strut":
            _child_count(obj, 0, 0, path)
            return Strut(params["a"], params["b"], params["diameter"], params.get("material"))
        if kind == "union":
            return Union(children(1), smooth=params.get("smooth", False))
        if kind == "intersection":
            return Intersection(children(1), smooth=params.get("smooth", False))
        if kind == "difference":
            a, b = children(2, 2)
            return Difference(a, b)
        if kind == "transform":
            (child,) = children(1, 1)
            return Transform(params["matrix"], child)
        if kind == "tile":
            (child,) = children(1, 1)
            return Tile(child, params.get("period"))
        if kind == "fgrade":
            (child,) = children(1, 1)
            return FGrade(
                params["expressions"],
                params["materials"],
                params.get("probabilistic", True),
                child,
            )
        if kind == "graph_lattice":
            _child_count(obj, 0, 0, path)
            topology = params.get("topology")
            if topology is not None:
                return GraphLattice(
                    LatticeType(topology),
                    params["cell_size"],
                    params["diameter"],
                    params.get("material"),
                )
            return GraphLattice.from_edges(
                params["edges"], params["diameter"], params.get("material")
            )
        if kind == "simulation_field":
            _child_count(obj, 0, 0, path)
            return SimulationField(
                resolve(params["inp_path"]),
                resolve(params["csv_path"]),
                params["expressions"],
                params["materials"],
                params.get("grid_resolution", 0.1),
            )
        if kind == "mesh_import":
            _child_count(obj, 0, 0, path)
            return MeshImport(
                resolve(params["mesh_path"]),
                params.get("material"),
                params.get("grid_resolution", 0.1),
            )
    except DesignJsonError:
        raise
    except KeyError as e:
        raise DesignJsonError(f"missing parameter {e.args[0]!r}", f"{path}.params") from None
    except ExprSyntaxError as e:
        raise DesignJsonError(f"malformed expression: {e}", f"{path}.params.expressions") from e
    except (DesignError, ValueError, OSError) as e:
        raise DesignJsonError(str(e), path) from e
    raise DesignJsonError(f"unknown node kind {kind!r}", path)


def _decode_materials(entries, path: str) -> MaterialTable:
    _expect(isinstance(entries, list), "materials must be a list", path)
    mats = []
    for i, m in enumerate(entries):
        p = f"{path}[{i}]"
        _expect(isinstance(m, dict), "material must be an object", p)
        try:
            mats.append(Material(int(m["id"]), str(m["name"]), tuple(int(c) for c in m["color"])))
        except KeyError as e:
            raise DesignJsonError(f"missing material field {e.args[0]!r}", p) from None
    try:
        return MaterialTable(mats)
    except DesignError as e:
        raise DesignJsonError(str(e), path) from e


def from_json(data: bytes | str, base_dir: str | None = None) -> DesignDocument:
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as e:
        raise DesignJsonError(f"invalid JSON: {e}", "$") from e
    _expect(isinstance(doc, dict), "document must be an object", "$")
    _expect("root" in doc and doc["root"] is not None, "missing root", "$")
    version = doc.get("vcad_version")
    _expect(version == VCAD_VERSION, f"unsupported vcad_version {version!r}", "$.vcad_version")
    materials = None
    if "materials" in doc:
        materials = _decode_materials(doc["materials"], "$.materials")
    root = _decode(doc["root"], "$.root", base_dir)
    return DesignDocument(root=root, materials=materials)


def load_design(path) -> DesignDocument:
    """Read a design document from disk, resolving relative asset paths."""
    with open(path, "rb") as f:
        data = f.read()
    return from_json(data, base_dir=os.path.dirname(os.path.abspath(path)))
