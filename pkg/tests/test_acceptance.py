"""Acceptance suite: one test per release criterion, each printing a
PASS/FAIL line (run with ``pytest tests/test_acceptance.py -v -s``).

Timing-sensitive checks use desk-scale workloads with generous wall-clock
budgets; statistical checks pin explicit tolerances.
"""

import hashlib
import os
import time

import numpy as np
import pytest

from vcadc import (
    BBox,
    FGrade,
    GraphLattice,
    RectPrism,
    SampleJob,
    SampleMode,
    SegmentationSpec,
    SizingField,
    Sphere,
    compile_stack,
    default_materials,
    export_tets,
    heterogeneity,
    marching_cubes,
    parse_inp,
    sample_segmented_grids,
    topology_edges,
    write_inp,
)
from vcadc.inp import DEFAULT_ELASTIC, TetMesh
from vcadc.lattice import LatticeType
from vcadc.simfield import AabbTree

from conftest import delaunay_ball
from test_design import _random_tree
from test_fea import GOLDEN_ONE_TET


def _report(name: str, ok: bool, detail: str = ""):
    print(f"ACCEPTANCE {name}: {'PASS' if ok else 'FAIL'}{' (' + detail + ')' if detail else ''}")
    assert ok, f"{name}: {detail}"


def test_acceptance_eq1_eq2():
    checks = [
        abs(heterogeneity([0.5, 0.5], 2) - 0.0) <= 1e-12,
        abs(heterogeneity([1.0, 0.0], 2) - 1.0) <= 1e-12,
        abs(heterogeneity([0.75, 0.25], 2) - 0.5) <= 1e-12,
    ]
    s = SizingField(0.5, 2.0)
    checks += [s.cell_size(0.0) == 0.5, s.cell_size(1.0) == 2.0, s.cell_size(0.5) == 1.25]
    _report("eq1-eq2-exact-values", all(checks))


def test_acceptance_adaptive_mesh_ordering(graded_bar):
    bar, _ = graded_bar
    t0 = time.perf_counter()
    coarse = len(export_tets(bar, SizingField(4.0, 4.0)).elements)
    adaptive = len(export_tets(bar, SizingField(1.0, 4.0)).elements)
    fine = len(export_tets(bar, SizingField(1.0, 1.0)).elements)
    elapsed = time.perf_counter() - t0
    ok = coarse < adaptive < fine and fine / coarse >= 10 and elapsed < 60
    _report(
        "adaptive-mesh-ordering",
        ok,
        f"coarse={coarse} adaptive={adaptive} fine={fine} ratio={fine / coarse:.1f}x {elapsed:.1f}s",
    )


def test_acceptance_alg2_interpolation_and_locate():
    mesh = delaunay_ball(n_points=700, radius=10.0, seed=13)
    tree = AabbTree(mesh)

    # affine nodal field reproduced to <= 1e-9 at 1e3 interior points
    coef = np.array([1.5, -0.25, 0.75])
    nodal = mesh.coords @ coef - 2.0
    rng = np.random.default_rng(99)
    interior = np.empty((0, 3))
    while len(interior) < 1000:
        cand = rng.uniform(-9, 9, (4000, 3))
        hit = tree.locate(cand) >= 0
        interior = np.vstack([interior, cand[hit]])
    pts = interior[:1000]
    tet = tree.locate(pts)
    lam = tree.barycentric(tet, pts)
    vals = tree.interpolate({"u": nodal}, tet, lam)["u"]
    max_err = float(np.max(np.abs(vals - (pts @ coef - 2.0))))

    # locate equals brute force on 1e4 queries
    queries = rng.uniform(-12, 12, (10_000, 3))
    got = tree.locate(queries)
    tets = mesh.coords[mesh.elements]
    lo, hi = tets.min(axis=1), tets.max(axis=1)
    minv = np.linalg.inv(
        np.stack([tets[:, 0] - tets[:, 3], tets[:, 1] - tets[:, 3], tets[:, 2] - tets[:, 3]], axis=2)
    )
    expected = np.full(len(queries), -1, dtype=np.int64)
    best_id = np.full(len(queries), np.iinfo(np.int64).max)
    for t in range(len(tets)):
        cand = np.nonzero(np.all((queries >= lo[t]) & (queries <= hi[t]), axis=1))[0]
        if cand.size == 0:
            continue
        lam123 = (queries[cand] - tets[t, 3]) @ minv[t].T
        inside = np.all(lam123 >= -1e-9, axis=1) & (1 - lam123.sum(axis=1) >= -1e-9)
        sel = cand[inside]
        take = mesh.element_ids[t] < best_id[sel]
        expected[sel[take]] = t
        best_id[sel[take]] = mesh.element_ids[t]
    agreement = float(np.mean(got == expected))

    ok = max_err <= 1e-9 and agreement == 1.0
    _report(
        "alg2-barycentric-and-locate",
        ok,
        f"affine_err={max_err:.2e} locate_agreement={agreement:.4f} tets={len(tets)}",
    )


def test_acceptance_alg3_partition_and_scale():
    mats = default_materials()
    slab = RectPrism((0, 0, 0), (250, 160, 50), mats.id("gray"))
    design = FGrade(
        ["x/250+0.5", "-x/250+0.5"], [mats.id("rigid"), mats.id("soft")], True, slab
    )
    spec = SegmentationSpec(4, reference_material=mats.id("rigid"), resolution=1.0)
    t0 = time.perf_counter()
    grids = sample_segmented_grids(design, spec)
    meshes = [marching_cubes(g, grids.origin, grids.spacing) for g in grids.values]
    elapsed = time.perf_counter() - t0

    queries = int(np.prod(grids.values[0].shape))
    counts = np.zeros(grids.values[0].shape, dtype=int)
    for v in grids.values:
        counts += (v <= 0).astype(int)
    whole = grids.interior_segment >= 0
    partition_exact = bool(
        np.array_equal(counts > 0, whole) and counts.max() == 1
    )
    ok = partition_exact and queries >= 2_000_000 and elapsed < 60 and all(len(t) > 0 for _, t in meshes)
    _report(
        "alg3-partition-and-timing",
        ok,
        f"queries={queries} partition_exact={partition_exact} {elapsed:.1f}s",
    )


def _bcc_grid_edges(n_cells, cell=10.0):
    base = topology_edges(LatticeType.BodyCenteredCubic, (cell, cell, cell))
    edges = []
    for i in range(n_cells[0]):
        for j in range(n_cells[1]):
            for k in range(n_cells[2]):
                off = np.array([i, j, k], dtype=float) * cell
                for a, b in base:
                    edges.append((a + off, b + off))
    return edges


def test_acceptance_strut_scaling():
    small = GraphLattice.from_edges(_bcc_grid_edges((2, 2, 1))[:30], 1.0, 0)
    big = GraphLattice.from_edges(_bcc_grid_edges((7, 7, 8))[:3000], 1.0, 0)
    assert small.strut_count == 30 and big.strut_count == 3000

    rng = np.random.default_rng(7)
    pts = rng.uniform([-10, -10, -10], [80, 80, 90], (1_000_000, 3))
    t0 = time.perf_counter()
    small.sdf_many(pts)
    t_small = time.perf_counter() - t0
    t0 = time.perf_counter()
    big.sdf_many(pts)
    t_big = time.perf_counter() - t0
    ratio = t_big / t_small
    _report(
        "strut-scaling",
        ratio <= 10.0,
        f"30 struts {t_small:.2f}s vs 3000 struts {t_big:.2f}s -> {ratio:.2f}x (cap 10x)",
    )


def test_acceptance_dither_statistics(tmp_path):
    mats = default_materials()
    mixed = FGrade(
        ["0.5", "0.5"], [mats.id("rigid"), mats.id("soft")], True,
        RectPrism((50, 50, 50), (100, 100, 100), 0),
    )
    job = SampleJob(mixed, BBox((0, 0, 0), (100, 100, 100)), 1.0, seed=2024)
    assert job.voxel_counts == (100, 100, 100)

    digests = []
    shares = []
    for workers in (1, 4):
        out = tmp_path / f"w{workers}"
        job_w = SampleJob(mixed, job.region, 1.0, seed=2024, workers=workers)
        compile_stack(job_w, mats, out)
        h = hashlib.sha256()
        rigid = total = 0
        from PIL import Image

        for f in sorted(os.listdir(out)):
            data = (out / f).read_bytes()
            h.update(f.encode())
            h.update(data)
            if f.endswith(".png"):
                a = np.asarray(Image.open(out / f))
                solid = a[:, :, 3] > 0
                rigid += int((solid & (a[:, :, 0] == mats[mats.id("rigid")].color[0])).sum())
                total += int(solid.sum())
        digests.append(h.hexdigest())
        shares.append(rigid / total)

    ok = digests[0] == digests[1] and total == 1_000_000 and abs(shares[0] - 0.5) <= 0.005
    _report(
        "dither-statistics-and-determinism",
        ok,
        f"share={shares[0]:.5f} (tol 0.005), identical_bytes={digests[0] == digests[1]}",
    )


def test_acceptance_marching_cubes_fidelity():
    res = 0.5
    n = 46
    ax = np.arange(n) * res - 11.5
    ii, jj, kk = np.meshgrid(ax, ax, ax, indexing="ij")
    g = np.sqrt(ii**2 + jj**2 + kk**2) - 10.0
    verts, tris = marching_cubes(g, (ax[0], ax[0], ax[0]), res)
    radii = np.linalg.norm(verts, axis=1)
    max_dev = float(np.max(np.abs(radii - 10.0)))
    edges = np.sort(np.concatenate([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]]), axis=1)
    _, counts = np.unique(edges, axis=0, return_counts=True)
    closed = bool(np.all(counts == 2))
    ok = max_dev <= res * np.sqrt(3) and closed
    _report(
        "marching-cubes-fidelity",
        ok,
        f"max_radius_dev={max_dev:.4f}mm (cap {res * np.sqrt(3):.4f}), closed={closed}",
    )


def test_acceptance_inp_golden_and_roundtrip():
    mesh = TetMesh(
        node_ids=np.array([1, 2, 3, 4]),
        coords=np.array([[0.0, 0, 0], [10.0, 0, 0], [0, 10.0, 0], [0, 0, 10.0]]),
        element_ids=np.array([1]),
        elements=np.array([[0, 1, 2, 3]]),
        element_type="C3D4",
        material=np.array([10]),
    )
    data = write_inp(mesh, {10: "rigid"}, DEFAULT_ELASTIC)
    golden_ok = data.decode() == GOLDEN_ONE_TET
    back = parse_inp(data)
    roundtrip_ok = bool(
        np.array_equal(back.coords, mesh.coords) and np.array_equal(back.elements, mesh.elements)
    )
    cards_ok = (
        DEFAULT_ELASTIC["rigid"].youngs_modulus_mpa == 2850.0
        and DEFAULT_ELASTIC["rigid"].poisson_ratio == 0.39
        and DEFAULT_ELASTIC["soft"].youngs_modulus_mpa == 0.383
        and DEFAULT_ELASTIC["soft"].poisson_ratio == 0.50
    )
    _report(
        "inp-golden-and-material-cards",
        golden_ok and roundtrip_ok and cards_ok,
        f"golden={golden_ok} roundtrip={roundtrip_ok} cards={cards_ok}",
    )


def test_acceptance_csg_tile_fgrade_invariants(graded_bar):
    rng = np.random.default_rng(2025)
    pts = rng.uniform(-15, 15, (1000, 3))
    csg_ok = True
    for _ in range(25):
        node, fn = _random_tree(rng, 3)
        if np.max(np.abs(node.sdf_many(pts) - fn(pts))) > 1e-12:
            csg_ok = False
            break

    from vcadc import Tile

    cell = FGrade(["x/4+0.5", "-x/4+0.5"], [1, 2], True, RectPrism((0, 0, 0), (4, 4, 4), 0))
    tiled = Tile(cell, (4, 4, 4))
    probes = np.array([[0.5, 0.25, -1.0], [1.5, 0, 0], [-0.75, 1.25, 0.5]])
    tile_ok = True
    for k in (1, 2, -3):
        if not np.array_equal(tiled.sdf_many(probes), tiled.sdf_many(probes + 4.0 * k)):
            tile_ok = False

    bar, _ = graded_bar
    inner = rng.uniform([-7.5, -5, -2.5], [7.5, 5, 2.5], (2000, 3))
    inside = bar.sdf_many(inner) <= 0
    totals = sum(bar.fractions_many(inner[inside]).values())
    fgrade_ok = bool(np.all(np.abs(totals - 1.0) <= 1e-9))

    _report(
        "csg-tile-fgrade-invariants",
        csg_ok and tile_ok and fgrade_ok,
        f"csg={csg_ok} tile={tile_ok} fgrade_norm={fgrade_ok}",
    )
