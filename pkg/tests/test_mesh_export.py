import json

import numpy as np
import pytest

from vcadc import (
    DesignError,
    RectPrism,
    SegmentationSpec,
    Sphere,
    default_materials,
    export_meshes,
    marching_cubes,
    read_stl,
    sample_segmented_grids,
)
from vcadc.nodes import FGrade


def test_spec_default_ranges_partition_unit_interval():
    spec = SegmentationSpec(4)
    assert spec.ranges[0] == (0.0, 0.25)
    assert spec.ranges[-1] == (0.75, 1.0)
    idx = spec.range_index(np.array([0.0, 0.1, 0.25, 0.5, 0.99, 1.0]))
    assert idx.tolist() == [0, 0, 1, 2, 3, 3]  # half-open, last closed


def test_spec_validation():
    with pytest.raises(DesignError):
        SegmentationSpec(0)
    with pytest.raises(DesignError):
        SegmentationSpec(2, ranges=[(0.0, 0.4), (0.5, 1.0)])  # gap


def _sphere_grid(res=0.5, r=10.0):
    n = int(np.ceil(2 * r / res)) + 5
    ax = (np.arange(n) - (n - 1) / 2) * res
    ii, jj, kk = np.meshgrid(ax, ax, ax, indexing="ij")
    g = np.sqrt(ii**2 + jj**2 + kk**2) - r
    origin = (ax[0], ax[0], ax[0])
    return g, origin, res


def test_marching_cubes_sphere_vertex_fidelity():
    g, origin, res = _sphere_grid()
    verts, tris = marching_cubes(g, origin, res)
    assert len(tris) > 1000
    radii = np.linalg.norm(verts, axis=1)
    diag = res * np.sqrt(3)
    assert np.max(np.abs(radii - 10.0)) <= diag


def test_marching_cubes_closed_two_manifold():
    g, origin, res = _sphere_grid(res=1.0)
    verts, tris = marching_cubes(g, origin, res)
    edges = np.sort(
        np.concatenate([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]]), axis=1
    )
    _, counts = np.unique(edges, axis=0, return_counts=True)
    assert np.all(counts == 2)
    # no degenerate triangles: distinct indices, all valid
    assert np.all(tris[:, 0] != tris[:, 1])
    assert np.all(tris[:, 1] != tris[:, 2])
    assert np.all(tris[:, 0] != tris[:, 2])
    assert tris.min() >= 0 and tris.max() < len(verts)


def test_marching_cubes_outward_orientation():
    g, origin, res = _sphere_grid(res=1.0)
    verts, tris = marching_cubes(g, origin, res)
    vol = np.einsum("ij,ij->i", verts[tris[:, 0]], np.cross(verts[tris[:, 1]], verts[tris[:, 2]])).sum() / 6
    assert vol == pytest.approx(4 / 3 * np.pi * 1000, rel=0.02)


def test_marching_cubes_empty_grid():
    verts, tris = marching_cubes(np.full((4, 4, 4), 1.0), (0, 0, 0), 1.0)
    assert len(verts) == 0 and len(tris) == 0


def test_single_segment_equals_plain_sdf(graded_bar):
    bar, mats = graded_bar
    spec = SegmentationSpec(1, reference_material=mats.id("red"), resolution=0.5)
    grids = sample_segmented_grids(bar, spec)
    nx, ny, nz = grids.values[0].shape
    ax = [grids.origin[d] + np.arange(s) * grids.spacing for d, s in enumerate((nx, ny, nz))]
    ii, jj, kk = np.meshgrid(*ax, indexing="ij")
    pts = np.stack([ii.ravel(), jj.ravel(), kk.ravel()], axis=1)
    sdf = bar.sdf_many(pts).reshape(nx, ny, nz)
    expected = np.minimum(sdf, 2 * grids.spacing)
    assert np.allclose(grids.values[0], expected)


def test_two_material_halves_complementary():
    mats = default_materials()
    bar = RectPrism((0, 0, 0), (16, 8, 8), 0)
    stepped = FGrade(["x >= 0", "x < 0"], [mats.id("red"), mats.id("blue")], True, bar)
    spec = SegmentationSpec(2, reference_material=mats.id("red"), resolution=0.5)
    grids = sample_segmented_grids(stepped, spec)
    seg = grids.interior_segment
    nx = seg.shape[0]
    xs = grids.origin[0] + np.arange(nx) * grids.spacing
    interior = seg >= 0
    pos = xs >= 0
    # right half (red fraction 1) in segment 1; left half in segment 0
    assert np.all(seg[interior & pos[:, None, None]] == 1)
    assert np.all(seg[interior & ~pos[:, None, None]] == 0)


def test_partition_property(graded_bar):
    bar, mats = graded_bar
    spec = SegmentationSpec(4, reference_material=mats.id("red"), resolution=0.5)
    grids = sample_segmented_grids(bar, spec)
    interior_total = int((grids.interior_segment >= 0).sum())
    per_segment = [int((grids.interior_segment == s).sum()) for s in range(4)]
    assert sum(per_segment) == interior_total
    assert all(c > 0 for c in per_segment)
    # and each interior voxel is interior in exactly one grid
    counts = np.zeros(grids.values[0].shape, dtype=int)
    for v in grids.values:
        counts += (v <= 0).astype(int)
    assert np.array_equal(counts > 0, grids.interior_segment >= 0)
    assert counts.max() == 1


def test_export_meshes_files_and_manifest(tmp_path, graded_bar):
    bar, mats = graded_bar
    spec = SegmentationSpec(4, reference_material=mats.id("red"), resolution=0.5)
    manifest = export_meshes(bar, spec, mats, tmp_path)
    for s in range(4):
        v, t = read_stl(tmp_path / f"segment_{s}.stl")
        assert len(t) > 0
    m = json.loads((tmp_path / "mesh_manifest.json").read_text())
    assert [seg["fraction_range"] for seg in m["segments"]] == [
        [0.0, 0.25], [0.25, 0.5], [0.5, 0.75], [0.75, 1.0]
    ]
    assert m["reference_material"]["name"] == "red"


def test_single_sphere_watertight_stl(tmp_path):
    mats = default_materials()
    s = Sphere((0, 0, 0), 8, mats.id("red"))
    spec = SegmentationSpec(1, reference_material=mats.id("red"), resolution=0.5)
    export_meshes(s, spec, mats, tmp_path)
    verts, tris = read_stl(tmp_path / "segment_0.stl")
    edges = np.sort(np.concatenate([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]]), axis=1)
    _, counts = np.unique(edges, axis=0, return_counts=True)
    assert np.all(counts == 2)


def test_stl_bytes_deterministic(tmp_path, graded_bar):
    bar, mats = graded_bar
    spec = SegmentationSpec(2, reference_material=mats.id("red"), resolution=0.5)
    a = tmp_path / "a"
    b = tmp_path / "b"
    export_meshes(bar, spec, mats, a, workers=1)
    export_meshes(bar, spec, mats, b, workers=4)
    for s in range(2):
        assert (a / f"segment_{s}.stl").read_bytes() == (b / f"segment_{s}.stl").read_bytes()
