"""Lowering designs to per-layer material images (PNG stacks).

The design is sampled at voxel centers on a printer-resolution grid; each
interior voxel's fractions are collapsed to one material either
probabilistically (dithering, the print-faithful mode) or by threshold
(argmax). Dither draws come from a counter-based hash of the voxel
coordinate and job seed, so output bytes are identical no matter how the
work is scheduled. Layers are independent work units; a worker pool maps
over them and each PNG is written by exactly one worker.
"""

from __future__ import annotations

import enum
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from PIL import Image

from .errors import DesignError
from .geom import BBox, as_vec3
from .hashing import uniform_from_coords
from .materials import MaterialTable
from .nodes import DesignNode

MANIFEST_NAME = "stack_manifest.json"


class SampleMode(enum.Enum):
    Probabilistic = "prob"
    Threshold = "thresh"


@dataclass
class SampleJob:
    design: DesignNode
    region: BBox
    resolution: np.ndarray  # mm per voxel per axis
    seed: int = 0
    mode: SampleMode = SampleMode.Probabilistic
    workers: int | None = None

    def __post_init__(self):
        self.resolution = as_vec3(self.resolution) if np.ndim(self.resolution) else as_vec3([self.resolution] * 3)
        if np.any(self.resolution <= 0):
            raise DesignError(f"voxel resolution must be > 0, got {self.resolution}")
        if np.any(self.region.size <= 0):
            raise DesignError("sample region is degenerate")
        self.seed = int(self.seed)

    @property
    def voxel_counts(self) -> tuple[int, int, int]:
        n = np.ceil(self.region.size / self.resolution - 1e-9).astype(int)
        return int(n[0]), int(n[1]), int(n[2])


def assign_materials(
    field: dict[int, np.ndarray],
    ix: np.ndarray,
    iy: np.ndarray,
    iz: np.ndarray,
    seed: int,
    mode: SampleMode,
) -> np.ndarray:
    """Collapse fraction fields to one material id per voxel (-1 = empty).

    Probabilistic mode walks the cumulative fractions in material-id order
    against a per-voxel uniform draw; threshold takes the argmax (ties to
    the lowest id). Voxels whose fractions sum to zero stay empty.
    """
    n = len(ix)
    if not field:
        return np.full(n, -1, dtype=np.int64)
    ids = np.array(sorted(field), dtype=np.int64)
    fracs = np.stack([field[int(m)] for m in ids])  # (M, N)
    total = fracs.sum(axis=0)
    covered = total > 0.0

    if mode is SampleMode.Threshold:
        pick = np.argmax(fracs, axis=0)  # first max wins = lowest id
    else:
        u = uniform_from_coords(ix, iy, iz, seed) * np.where(covered, total, 1.0)
        cum = np.cumsum(fracs, axis=0)
        pick = (u[None, :] >= cum).sum(axis=0)
        pick = np.minimum(pick, len(ids) - 1)
    out = np.where(covered, ids[pick], -1)
    return out


def _render_layer(job: SampleJob, iz: int) -> np.ndarray:
    nx, ny, _ = job.voxel_counts
    origin = job.region.min
    res = job.resolution
    ix, iy = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    ix = ix.ravel()
    iy = iy.ravel()
    pts = np.empty((nx * ny, 3))
    pts[:, 0] = origin[0] + (ix + 0.5) * res[0]
    pts[:, 1] = origin[1] + (iy + 0.5) * res[1]
    pts[:, 2] = origin[2] + (iz + 0.5) * res[2]

    inside = job.design.sdf_many(pts) <= 0.0
    material = np.full(nx * ny, -1, dtype=np.int64)
    hit = np.nonzero(inside)[0]
    if hit.size:
        field = job.design.fractions_many(pts[hit])
        material[hit] = assign_materials(
            field, ix[hit], iy[hit], np.full(hit.size, iz), job.seed, job.mode
        )
    return material.reshape(nx, ny)


def layer_image(material: np.ndarray, materials: MaterialTable) -> Image.Image:
    """Material-id grid (nx, ny) to an RGBA image; empty voxels transparent.

    Pixel (column x, row y) maps to voxel (ix, iy) with row 0 at min-y.
    """
    nx, ny = material.shape
    if material.max(initial=-1) >= len(materials):
        raise DesignError(
            f"design references material id {int(material.max())} "
            f"but the table has {len(materials)} entries"
        )
    lut = np.zeros((len(materials) + 1, 4), dtype=np.uint8)
    for m in materials:
        lut[m.id + 1] = m.color
    rgba = lut[material.T + 1]  # (ny, nx, 4), row-major y
    return Image.fromarray(rgba, "RGBA")


def compile_stack(job: SampleJob, materials: MaterialTable, out_dir) -> dict:
    """Write one PNG per z-layer plus a manifest; returns the manifest."""
    os.makedirs(out_dir, exist_ok=True)
    nx, ny, nz = job.voxel_counts
    workers = job.workers or os.cpu_count() or 1

    def do_layer(iz: int) -> str:
        grid = _render_layer(job, iz)
        img = layer_image(grid, materials)
        name = f"layer_{iz:05d}.png"
        img.save(os.path.join(out_dir, name), format="PNG")
        return name

    if workers > 1 and nz > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            layer_files = list(pool.map(do_layer, range(nz)))
    else:
        layer_files = [do_layer(iz) for iz in range(nz)]

    manifest = {
        "region": {"min": [float(v) for v in job.region.min], "max": [float(v) for v in job.region.max]},
        "resolution_mm": [float(v) for v in job.resolution],
        "voxels": [nx, ny, nz],
        "seed": job.seed,
        "mode": job.mode.value,
        "layer_count": nz,
        "layers": layer_files,
        "materials": [
            {"id": m.id, "name": m.name, "color": list(m.color)} for m in materials
        ],
    }
    with open(os.path.join(out_dir, MANIFEST_NAME), "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
    return manifest


def render_slice(
    design: DesignNode,
    materials: MaterialTable,
    axis: str,
    at: float,
    resolution: float,
    seed: int = 0,
    mode: SampleMode = SampleMode.Threshold,
) -> Image.Image:
    """A single cross-section image through a bounded design.

    Slices outside the design bounds come back fully transparent.
    """
    bounds = design.bounds()
    axes = {"x": 0, "y": 1, "z": 2}
    if axis not in axes:
        raise DesignError(f"axis must be one of x, y, z, got {axis!r}")
    k = axes[axis]
    u, v = [i for i in range(3) if i != k]
    nu = max(int(np.ceil(bounds.size[u] / resolution)), 1)
    nv = max(int(np.ceil(bounds.size[v] / resolution)), 1)
    iu, iv = np.meshgrid(np.arange(nu), np.arange(nv), indexing="ij")
    iu = iu.ravel()
    iv = iv.ravel()
    pts = np.empty((nu * nv, 3))
    pts[:, k] = at
    pts[:, u] = bounds.min[u] + (iu + 0.5) * resolution
    pts[:, v] = bounds.min[v] + (iv + 0.5) * resolution

    material = np.full(nu * nv, -1, dtype=np.int64)
    if bounds.min[k] <= at <= bounds.max[k]:
        inside = design.sdf_many(pts) <= 0.0
        hit = np.nonzero(inside)[0]
        if hit.size:
            field = design.fractions_many(pts[hit])
            iw = np.zeros(hit.size, dtype=np.int64)
            material[hit] = assign_materials(field, iu[hit], iv[hit], iw, seed, mode)
    return layer_image(material.reshape(nu, nv), materials)
