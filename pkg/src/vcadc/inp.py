"""Reading and writing the .inp finite-element subset.

Supported grammar: ``*NODE``, ``*ELEMENT, TYPE=C3D4|C3D8R[, ELSET=name]``,
``*ELSET, ELSET=name``, and ``**`` comment lines. Unknown keyword blocks
are skipped with a warning. Node and element ids stay 1-based as written;
connectivity is exposed 0-based into the coordinate array. Tetrahedra are
reordered at parse time so volumes come out positive (exporters disagree
on winding).
"""

from __future__ import annotations

import io
import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import InpError, ResultsCsvError

log = logging.getLogger(__name__)

DEGENERATE_VOLUME_MM3 = 1e-15


@dataclass
class ElasticModel:
    name: str
    youngs_modulus_mpa: float
    poisson_ratio: float


DEFAULT_ELASTIC = {
    "rigid": ElasticModel("rigid", 2850.0, 0.39),
    "soft": ElasticModel("soft", 0.383, 0.50),
}


@dataclass
class FeaMesh:
    """Nodes plus homogeneous-type connectivity and optional material data."""

    node_ids: np.ndarray  # (N,) int64, as written in the file
    coords: np.ndarray  # (N, 3) float64, mm
    element_ids: np.ndarray  # (E,) int64
    elements: np.ndarray  # (E, k) int64, 0-based indices into coords
    element_type: str  # "C3D4" or "C3D8R"
    material: np.ndarray | None = None  # (E,) int material ids, exporter-filled
    element_sets: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def is_tet(self) -> bool:
        return self.element_type == "C3D4"

    def centroids(self) -> np.ndarray:
        return self.coords[self.elements].mean(axis=1)

    def tet_volumes(self) -> np.ndarray:
        v = self.coords[self.elements]
        return np.linalg.det(v[:, 1:] - v[:, :1]) / 6.0


class TetMesh(FeaMesh):
    pass


class BrickMesh(FeaMesh):
    pass


_SUPPORTED = {"C3D4": (4, TetMesh), "C3D8R": (8, BrickMesh)}


def _keyword_options(line: str) -> tuple[str, dict[str, str]]:
    parts = [p.strip() for p in line.lstrip("*").split(",")]
    opts = {}
    for p in parts[1:]:
        if "=" in p:
            k, v = p.split("=", 1)
            opts[k.strip().upper()] = v.strip()
        elif p:
            opts[p.upper()] = ""
    return parts[0].upper(), opts


def parse_inp(data: bytes | str) -> FeaMesh:
    """Parse the supported .inp subset into a TetMesh or BrickMesh."""
    if isinstance(data, bytes):
        data = data.decode("utf-8", errors="replace")
    lines = data.splitlines()

    node_ids: list[int] = []
    coords: list[list[float]] = []
    element_ids: list[int] = []
    element_rows: list[list[int]] = []
    element_type: str | None = None
    element_sets: dict[str, list[int]] = {}

    i = 0
    n = len(lines)

    def data_lines(start: int):
        j = start
        while j < n:
            raw = lines[j].strip()
            if raw.startswith("*") and not raw.startswith("**"):
                break
            j += 1
            if not raw or raw.startswith("**"):
                continue
            yield raw
        nonlocal i
        i = j

    while i < n:
        raw = lines[i].strip()
        if not raw or raw.startswith("**"):
            i += 1
            continue
        if not raw.startswith("*"):
            raise InpError(f"unexpected data outside a keyword block at line {i + 1}: {raw!r}")
        keyword, opts = _keyword_options(raw)
        i += 1
        if keyword == "NODE":
            for row in data_lines(i):
                fields = row.split(",")
                if len(fields) < 4:
                    raise InpError(f"node line needs 'id, x, y, z': {row!r}")
                node_ids.append(int(fields[0]))
                coords.append([float(fields[1]), float(fields[2]), float(fields[3])])
        elif keyword == "ELEMENT":
            etype = opts.get("TYPE", "").upper()
            if etype not in _SUPPORTED:
                raise InpError(f"unsupported element type {etype or '<missing>'!r} "
                               f"(supported: {', '.join(sorted(_SUPPORTED))})")
            arity = _SUPPORTED[etype][0]
            if element_type is not None and element_type != etype:
                raise InpError(f"mixed element types {element_type}/{etype} are not supported")
            element_type = etype
            block_ids = []
            for row in data_lines(i):
                fields = [int(f) for f in row.split(",") if f.strip()]
                if len(fields) != arity + 1:
                    raise InpError(f"{etype} element line needs id plus {arity} nodes: {row!r}")
                element_ids.append(fields[0])
                element_rows.append(fields[1:])
                block_ids.append(fields[0])
            elset = opts.get("ELSET")
            if elset:
                element_sets.setdefault(elset, []).extend(block_ids)
        elif keyword == "ELSET":
            name = opts.get("ELSET")
            if not name:
                raise InpError("*ELSET block is missing its ELSET=<name> option")
            ids = element_sets.setdefault(name, [])
            for row in data_lines(i):
                ids.extend(int(f) for f in row.split(",") if f.strip())
        else:
            log.warning("ignoring unsupported keyword *%s", keyword)
            for _ in data_lines(i):
                pass

    if not node_ids:
        raise InpError("file has no *NODE section")
    if element_type is None:
        raise InpError("file has no *ELEMENT section")

    node_ids_arr = np.array(node_ids, dtype=np.int64)
    if len(np.unique(node_ids_arr)) != len(node_ids_arr):
        raise InpError("duplicate node ids")
    coords_arr = np.array(coords, dtype=np.float64)
    index_of = {int(nid): k for k, nid in enumerate(node_ids_arr)}
    try:
        elements = np.array(
            [[index_of[nid] for nid in row] for row in element_rows], dtype=np.int64
        )
    except KeyError as e:
        raise InpError(f"element references unknown node id {e.args[0]}") from None
    element_ids_arr = np.array(element_ids, dtype=np.int64)

    cls = _SUPPORTED[element_type][1]
    mesh = cls(
        node_ids=node_ids_arr,
        coords=coords_arr,
        element_ids=element_ids_arr,
        elements=elements,
        element_type=element_type,
        element_sets={k: np.array(v, dtype=np.int64) for k, v in element_sets.items()},
    )
    if mesh.is_tet:
        vols = mesh.tet_volumes()
        flipped = vols < 0
        if flipped.any():
            mesh.elements[flipped] = mesh.elements[flipped][:, [0, 1, 3, 2]]
            vols = np.abs(vols)
        if np.any(vols < DEGENERATE_VOLUME_MM3):
            bad = mesh.element_ids[vols < DEGENERATE_VOLUME_MM3][:5]
            raise InpError(f"degenerate tetrahedra (volume < {DEGENERATE_VOLUME_MM3} mm^3): "
                           f"ids {bad.tolist()}")
    return mesh


def write_inp(
    mesh: FeaMesh,
    material_names: dict[int, str] | None = None,
    elastic_models: dict[str, ElasticModel] | None = None,
) -> bytes:
    """Serialize a mesh; one *ELSET per material plus optional elastic cards.

    ``material_names`` maps material ids to set/material names (defaults to
    ``MAT<i>``); ``elastic_models`` attaches *MATERIAL/*ELASTIC/*SOLID
    SECTION cards for names it covers. Output reparses via parse_inp.
    """
    out = io.StringIO()
    out.write("*NODE\n")
    for nid, (x, y, z) in zip(mesh.node_ids, mesh.coords):
        out.write(f"{nid}, {float(x)!r}, {float(y)!r}, {float(z)!r}\n")
    out.write(f"*ELEMENT, TYPE={mesh.element_type}\n")
    for eid, row in zip(mesh.element_ids, mesh.elements):
        nodes = ", ".join(str(int(mesh.node_ids[k])) for k in row)
        out.write(f"{eid}, {nodes}\n")

    def write_set(name: str, ids: np.ndarray):
        out.write(f"*ELSET, ELSET={name}\n")
        for s in range(0, len(ids), 16):
            out.write(", ".join(str(int(v)) for v in ids[s : s + 16]) + "\n")

    names_used: list[str] = []
    if mesh.material is not None:
        for mid in np.unique(mesh.material):
            name = (material_names or {}).get(int(mid), f"MAT{int(mid)}")
            write_set(name, mesh.element_ids[mesh.material == mid])
            names_used.append(name)
    else:
        for name, ids in mesh.element_sets.items():
            write_set(name, ids)
            names_used.append(name)

    if elastic_models:
        for name in names_used:
            model = elastic_models.get(name)
            if model is None:
                continue
            out.write(f"*MATERIAL, NAME={model.name}\n*ELASTIC\n")
            out.write(f"{float(model.youngs_modulus_mpa)!r}, {float(model.poisson_ratio)!r}\n")
            out.write(f"*SOLID SECTION, ELSET={name}, MATERIAL={model.name}\n")
    return out.getvalue().encode()


@dataclass
class NodalResults:
    """Per-node result columns aligned with a mesh's node order."""

    columns: dict[str, np.ndarray]

    def names(self) -> list[str]:
        return list(self.columns)

    @property
    def has_displacement(self) -> bool:
        return all(k in self.columns for k in ("dx", "dy", "dz"))


_ID_COLUMNS = {"id", "node", "node_id", "nid"}


def parse_results_csv(data: bytes | str, mesh: FeaMesh) -> NodalResults:
    """Parse a nodal results CSV (comma separated, header row, '#' comments).

    The id column must be named id/node/node_id/nid; every mesh node needs a
    row. Values pass through verbatim: no unit conversion is applied, the
    mapping expressions own the units.
    """
    if isinstance(data, bytes):
        data = data.decode("utf-8", errors="replace")
    rows = [ln for ln in data.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if not rows:
        raise ResultsCsvError("results file is empty")
    header = [h.strip() for h in rows[0].split(",")]
    if not header or header[0].lower() not in _ID_COLUMNS:
        raise ResultsCsvError(
            f"first column must be a node id column ({'/'.join(sorted(_ID_COLUMNS))}), "
            f"got {header[0] if header else ''!r}"
        )
    value_names = header[1:]
    if not value_names:
        raise ResultsCsvError("no result columns after the id column")

    ids = np.empty(len(rows) - 1, dtype=np.int64)
    values = np.empty((len(rows) - 1, len(value_names)))
    for r, line in enumerate(rows[1:]):
        fields = line.split(",")
        if len(fields) != len(header):
            raise ResultsCsvError(f"row {r + 2} has {len(fields)} fields, expected {len(header)}")
        ids[r] = int(fields[0])
        values[r] = [float(f) for f in fields[1:]]
    if not np.all(np.isfinite(values)):
        raise ResultsCsvError("results contain non-finite values")
    uniq, counts = np.unique(ids, return_counts=True)
    if np.any(counts > 1):
        raise ResultsCsvError(f"duplicate node ids in results: {uniq[counts > 1][:10].tolist()}")

    row_of = {int(i): r for r, i in enumerate(ids)}
    missing = [int(nid) for nid in mesh.node_ids if int(nid) not in row_of]
    if missing:
        raise ResultsCsvError(
            f"{len(missing)} mesh nodes missing from results, first 10: {missing[:10]}"
        )
    order = np.array([row_of[int(nid)] for nid in mesh.node_ids], dtype=np.int64)
    aligned = values[order]
    return NodalResults({name: aligned[:, c].copy() for c, name in enumerate(value_names)})
