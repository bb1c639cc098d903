"""End-to-end run of the algorithmic lattice-fill demo at N=50."""

import json
import os

import numpy as np

import lattice_fill_demo


def test_demo_runs_end_to_end(tmp_path):
    out_dir = lattice_fill_demo.main(str(tmp_path), n_points=50)
    stack = os.path.join(out_dir, "stack")
    layers = [f for f in os.listdir(stack) if f.endswith(".png")]
    assert len(layers) > 10
    manifest = json.loads(open(os.path.join(stack, "stack_manifest.json")).read())
    assert manifest["layer_count"] == len(layers)


def test_pruned_edges_stay_inside_and_shortest_is_yellow(tmp_path):
    root, mats, n_struts = lattice_fill_demo.build(str(tmp_path), n_points=50, seed=3)
    assert n_struts > 20
    yellow = mats.id("yellow")

    lattice = root.children[0]
    shell = root.children[1].build()
    shortest = None
    shortest_len = np.inf
    for graded in lattice.children:
        strut = graded.children[0]
        a = np.array(strut.params["a"])
        b = np.array(strut.params["b"])
        mid = 0.5 * (a + b)
        # retained edges: endpoints and midpoint inside the mesh
        assert shell.sdf(a) <= 0 and shell.sdf(b) <= 0 and shell.sdf(mid) <= 0
        length = float(np.linalg.norm(b - a))
        if length < shortest_len:
            shortest_len = length
            shortest = graded
    a = np.array(shortest.children[0].params["a"])
    f = shortest.build().fractions(a)
    assert f[yellow] == 1.0  # shortest strut is pure yellow
