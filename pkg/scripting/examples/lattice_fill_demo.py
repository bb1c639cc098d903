"""Algorithmic multi-material lattice inside an imported mesh.

Random interior points are tetrahedralized with scipy's Delaunay; the
unique edges that stay inside the mesh become struts, each graded between
yellow and magenta by its length (shortest struts pure yellow, longest
pure magenta), and the result is unioned with the mesh shell. The script
then serializes the design and compiles a coarse PNG stack through the
vcadc CLI.
"""

import os
import subprocess
import sys
import tempfile

import numpy as np
from scipy.spatial import Delaunay

import vcadpy as pv
from vcadc import write_stl


def icosphere(radius=8.0, subdiv=2):
    t = (1 + 5**0.5) / 2
    v = np.array(
        [
            [-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0],
            [0, -1, t], [0, 1, t], [0, -1, -t], [0, 1, -t],
            [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1],
        ],
        dtype=np.float64,
    )
    v /= np.linalg.norm(v, axis=1)[:, None]
    f = np.array(
        [
            [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
            [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
            [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
            [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
        ]
    )
    for _ in range(subdiv):
        mid = {}
        nv = list(v)

        def midpoint(i, j):
            key = (min(i, j), max(i, j))
            if key not in mid:
                m = v[i] + v[j]
                m /= np.linalg.norm(m)
                mid[key] = len(nv)
                nv.append(m)
            return mid[key]

        nf = []
        for a, b, c in f:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            nf += [[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]
        v, f = np.array(nv), np.array(nf)
    return v * radius, f


def build(work_dir, n_points=50, seed=7, strut_dia=0.6, mesh_resolution=0.4):
    materials = pv.default_materials()
    yellow = materials.id("yellow")
    magenta = materials.id("magenta")

    # 1. the bounding mesh, imported as a design node
    verts, faces = icosphere()
    stl_path = os.path.join(work_dir, "shell.stl")
    write_stl(stl_path, verts, faces)
    shell = pv.MeshImport(stl_path, materials.id("clear"), grid_resolution=mesh_resolution)
    shell_sdf = shell.build()

    # 2. sample interior points by rejection
    rng = np.random.default_rng(seed)
    points = np.empty((0, 3))
    while len(points) < n_points:
        cand = rng.uniform(-8, 8, (4 * n_points, 3))
        inside = shell_sdf.sdf_many(cand) <= -strut_dia  # keep struts clear of the wall
        points = np.vstack([points, cand[inside]])
    points = points[:n_points]

    # 3./4. Delaunay tetrahedralization -> unique edges
    tri = Delaunay(points)
    edges = set()
    for simplex in tri.simplices:
        for i in range(4):
            for j in range(i + 1, 4):
                edges.add((min(simplex[i], simplex[j]), max(simplex[i], simplex[j])))

    # 5. prune edges that leave the mesh (endpoint/midpoint test)
    kept = []
    for a, b in sorted(edges):
        pa, pb = points[a], points[b]
        mid = 0.5 * (pa + pb)
        if max(shell_sdf.sdf(pa), shell_sdf.sdf(pb), shell_sdf.sdf(mid)) <= 0:
            kept.append((pa, pb))

    # 6. length range for the color ramp
    lengths = [float(np.linalg.norm(b - a)) for a, b in kept]
    lo, hi = min(lengths), max(lengths)

    # 7./8. one graded strut per edge: shortest pure yellow, longest magenta
    lattice = pv.Union()
    for (a, b), length in zip(kept, lengths):
        t = (length - lo) / (hi - lo) if hi > lo else 0.0
        strut = pv.Strut(tuple(a), tuple(b), strut_dia)
        graded = pv.FGrade([f"{1 - t:.6f}", f"{t:.6f}"], [yellow, magenta], True, strut)
        lattice.add_child(graded)

    root = pv.Union([lattice, shell])
    return root, materials, len(kept)


def main(out_dir=None, n_points=50):
    out_dir = out_dir or tempfile.mkdtemp(prefix="lattice_fill_")
    os.makedirs(out_dir, exist_ok=True)
    root, materials, n_struts = build(out_dir, n_points=n_points)
    design_path = os.path.join(out_dir, "lattice_fill.json")
    root.save(design_path, materials)
    print(f"{n_struts} struts -> {design_path}")

    # 9. compile a coarse voxel stack through the CLI
    stack_dir = os.path.join(out_dir, "stack")
    subprocess.run(
        [sys.executable, "-m", "vcadc.cli", "compile-stack", design_path,
         "--res", "0.5", "--seed", "1", "--out", stack_dir],
        check=True,
    )
    print(f"stack in {stack_dir}")
    return out_dir


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else None)
