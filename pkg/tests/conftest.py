import numpy as np
import pytest


def make_icosphere(radius=8.0, subdiv=2):
    """Subdivided icosahedron on a sphere; returns (vertices, triangles)."""
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
        v = np.array(nv)
        f = np.array(nf)
    return v * radius, f


def delaunay_ball(n_points=400, radius=10.0, seed=0):
    """Random Delaunay tetrahedralization of a ball; returns a TetMesh."""
    from scipy.spatial import Delaunay

    from vcadc.inp import TetMesh

    rng = np.random.default_rng(seed)
    pts = rng.normal(size=(n_points, 3))
    pts *= (rng.uniform(0, 1, n_points) ** (1 / 3) / np.linalg.norm(pts, axis=1))[:, None]
    pts *= radius
    # surface shell so the hull approximates the sphere
    shell = rng.normal(size=(n_points // 2, 3))
    shell = shell / np.linalg.norm(shell, axis=1)[:, None] * radius
    pts = np.vstack([pts, shell])
    tri = Delaunay(pts)
    elems = tri.simplices.astype(np.int64)
    v = pts[elems]
    vols = np.linalg.det(v[:, 1:] - v[:, :1]) / 6.0
    flip = vols < 0
    elems[flip] = elems[flip][:, [0, 1, 3, 2]]
    keep = np.abs(vols) > 1e-9
    elems = elems[keep]
    return TetMesh(
        node_ids=np.arange(1, len(pts) + 1, dtype=np.int64),
        coords=pts,
        element_ids=np.arange(1, len(elems) + 1, dtype=np.int64),
        elements=elems,
        element_type="C3D4",
    )


@pytest.fixture(scope="session")
def icosphere():
    return make_icosphere(radius=8.0, subdiv=2)


@pytest.fixture(scope="session")
def ball_mesh():
    return delaunay_ball()


@pytest.fixture
def graded_bar():
    """The red-to-blue gradient bar used throughout the docs and tests."""
    from vcadc import FGrade, RectPrism, default_materials

    mats = default_materials()
    bar = RectPrism((0, 0, 0), (15, 10, 5), mats.id("gray"))
    root = FGrade(
        ["x/15+0.5", "-x/15+0.5"], [mats.id("red"), mats.id("blue")], True, bar
    )
    return root, mats
