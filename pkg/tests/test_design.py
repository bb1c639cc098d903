import math

import numpy as np
import pytest

from vcadc import (
    Difference,
    DesignError,
    EvalError,
    FGrade,
    FractionSet,
    Intersection,
    RectPrism,
    Sphere,
    Strut,
    Tile,
    Transform,
    UnboundedDesignError,
    Union,
    default_materials,
    rotation,
    scaling,
    translation,
)


def test_sphere_sdf_values():
    s = Sphere((0, 0, 0), 10, 1)
    assert s.sdf((0, 0, 0)) == -10.0
    assert s.sdf((13, 0, 0)) == 3.0


def test_union_min_rule():
    u = Union([Sphere((0, 0, 0), 10, 1), Sphere((20, 0, 0), 5, 2)])
    assert u.sdf((20, 0, 0)) == -5.0
    assert u.fractions((20, 0, 0)) == FractionSet({2: 1.0})


def test_rect_prism_bounds_and_sdf():
    r = RectPrism((0, 0, 0), (15, 10, 5), 0)
    b = r.bounds()
    assert np.array_equal(b.min, [-7.5, -5, -2.5])
    assert np.array_equal(b.max, [7.5, 5, 2.5])
    assert r.sdf((0, 0, 0)) == -2.5
    assert r.sdf((8.5, 0, 0)) == 1.0


def test_sphere_bounds():
    b = Sphere((0, 0, 0), 10).bounds()
    assert np.array_equal(b.min, [-10.0, -10.0, -10.0])
    assert np.array_equal(b.max, [10.0, 10.0, 10.0])


def test_intersection_bounds_ignore_unbounded_child():
    cell = RectPrism((0, 0, 0), (4, 4, 4), 0)
    clipped = Intersection([Tile(cell), Sphere((0, 0, 0), 10)])
    b = clipped.bounds()
    assert np.array_equal(b.min, [-10, -10, -10])
    assert np.array_equal(b.max, [10, 10, 10])


def test_unbounded_design_errors():
    with pytest.raises(UnboundedDesignError):
        Tile(RectPrism((0, 0, 0), (4, 4, 4), 0)).bounds()
    with pytest.raises(UnboundedDesignError):
        Union([Tile(RectPrism((0, 0, 0), (4, 4, 4), 0)), Sphere((0, 0, 0), 1)]).bounds()


def test_gradient_bar_fractions(graded_bar):
    bar, mats = graded_bar
    red, blue = mats.id("red"), mats.id("blue")
    assert bar.fractions((0, 0, 0)) == FractionSet({red: 0.5, blue: 0.5})
    end = bar.fractions((7.5, 0, 0))
    assert end[red] == 1.0 and end[blue] == 0.0
    assert bar.fractions((20, 0, 0)).empty  # exterior


def test_leaf_material_fraction():
    gray = RectPrism((0, 0, 0), (10, 10, 10), 0)
    assert gray.fractions((0, 0, 0)) == FractionSet({0: 1.0})


def test_difference_takes_a_material():
    d = Difference(Sphere((0, 0, 0), 10, 1), Sphere((0, 0, 0), 5, 2))
    assert d.sdf((0, 0, 0)) == 5.0  # removed interior
    assert d.sdf((7, 0, 0)) == -2.0
    assert d.fractions((7, 0, 0)) == FractionSet({1: 1.0})


def test_intersection_material_from_active_surface():
    # a clipped lattice-style intersection: the strut surface is the active
    # constraint inside the clip volume, so its material wins
    strut = Strut((-10, 0, 0), (10, 0, 0), 1.0, 5)
    clip = Sphere((0, 0, 0), 8, 7)
    clipped = Intersection([strut, clip])
    assert clipped.fractions((0, 0, 0)) == FractionSet({5: 1.0})
    # clip with no material at all still reports the strut
    clipped2 = Intersection([Strut((-10, 0, 0), (10, 0, 0), 1.0, 5), Sphere((0, 0, 0), 8)])
    assert clipped2.fractions((0, 0, 0)) == FractionSet({5: 1.0})


# --- CSG oracle --------------------------------------------------------------


def _random_tree(rng, depth):
    """Build matching (node, closure) pairs for exact-composition checking."""
    if depth == 0:
        kind = rng.integers(0, 3)
        if kind == 0:
            c = rng.uniform(-10, 10, 3)
            r = rng.uniform(1, 8)
            return Sphere(c, r, 0), lambda p: np.linalg.norm(p - c, axis=1) - r
        if kind == 1:
            c = rng.uniform(-10, 10, 3)
            d = rng.uniform(1, 10, 3)

            def box(p, c=c, d=d):
                q = np.abs(p - c) - d / 2
                return np.linalg.norm(np.maximum(q, 0), axis=1) + np.minimum(
                    q.max(axis=1), 0
                )

            return RectPrism(c, d, 0), box
        a = rng.uniform(-10, 10, 3)
        b = a + rng.uniform(-8, 8, 3)
        while np.allclose(a, b):
            b = a + rng.uniform(-8, 8, 3)
        dia = rng.uniform(0.5, 3)

        def capsule(p, a=a, b=b, r=dia / 2):
            ba = b - a
            t = np.clip((p - a) @ ba / (ba @ ba), 0, 1)
            return np.linalg.norm(p - a - np.outer(t, ba), axis=1) - r

        return Strut(a, b, dia, 0), capsule

    op = rng.integers(0, 3)
    if op == 2:
        na, fa = _random_tree(rng, depth - 1)
        nb, fb = _random_tree(rng, depth - 1)
        return Difference(na, nb), lambda p: np.maximum(fa(p), -fb(p))
    n_children = int(rng.integers(2, 4))
    pairs = [_random_tree(rng, depth - 1) for _ in range(n_children)]
    nodes = [p[0] for p in pairs]
    fns = [p[1] for p in pairs]
    if op == 0:

        def union(p, fns=fns):
            out = fns[0](p)
            for f in fns[1:]:
                out = np.minimum(out, f(p))
            return out

        return Union(nodes), union

    def inter(p, fns=fns):
        out = fns[0](p)
        for f in fns[1:]:
            out = np.maximum(out, f(p))
        return out

    return Intersection(nodes), inter


def test_csg_oracle_random_trees():
    rng = np.random.default_rng(42)
    pts = rng.uniform(-15, 15, (1000, 3))
    for _ in range(40):
        node, fn = _random_tree(rng, 3)
        got = node.sdf_many(pts)
        expected = fn(pts)
        assert np.max(np.abs(got - expected)) <= 1e-12


def test_lipschitz_one_on_primitives():
    rng = np.random.default_rng(3)
    prims = [
        Sphere((1, 2, 3), 5, 0),
        RectPrism((0, -1, 2), (4, 6, 3), 0),
        Strut((0, 0, 0), (5, 5, 5), 1.0, 0),
        Transform.translate((3, -2, 1), Transform(rotation((1, 1, 0), 0.7), Sphere((0, 0, 0), 4, 0))),
    ]
    p = rng.uniform(-10, 10, (2000, 3))
    q = p + rng.normal(0, 2, (2000, 3))
    step = np.linalg.norm(p - q, axis=1)
    for prim in prims:
        dd = np.abs(prim.sdf_many(p) - prim.sdf_many(q))
        assert np.all(dd <= step + 1e-9)


def test_tile_periodicity_exact():
    # dyadic-friendly period and probes make the wrap arithmetic exact
    cell = FGrade(["x/4+0.5", "-x/4+0.5"], [1, 2], True, RectPrism((0, 0, 0), (4, 4, 4), 0))
    t = Tile(cell, (4, 4, 4))
    probes = np.array([[0.5, 0.25, -1.0], [1.5, 0, 0], [-0.75, 1.25, 0.5]])
    for k in (1, 2, 5, -3):
        shifted = probes + k * 4.0
        assert np.array_equal(t.sdf_many(probes), t.sdf_many(shifted))
        f0 = t.fractions_many(probes)
        f1 = t.fractions_many(shifted)
        assert set(f0) == set(f1)
        for mid in f0:
            assert np.array_equal(f0[mid], f1[mid])
    for p in probes:
        for k in (1, -2):
            assert dict(t.fractions(p)) == dict(t.fractions(p + k * 4.0))


def test_tile_default_period_is_child_bbox():
    t = Tile(RectPrism((0, 0, 0), (3, 4, 5), 0))
    assert np.array_equal(t.period, [3, 4, 5])


def test_fgrade_normalization_where_covered(graded_bar):
    bar, _ = graded_bar
    rng = np.random.default_rng(11)
    pts = rng.uniform([-7.5, -5, -2.5], [7.5, 5, 2.5], (500, 3))
    inside = bar.sdf_many(pts) <= 0
    field = bar.fractions_many(pts[inside])
    total = sum(field.values())
    assert np.all(np.abs(total - 1.0) <= 1e-9)


def test_fgrade_falls_back_to_child_when_all_zero():
    child = RectPrism((0, 0, 0), (10, 10, 10), 7)
    g = FGrade(["0", "0"], [1, 2], True, child)
    assert g.fractions((0, 0, 0)) == FractionSet({7: 1.0})


def test_fgrade_arity_and_duplicate_errors():
    child = Sphere((0, 0, 0), 1)
    with pytest.raises(DesignError):
        FGrade(["x", "y"], [0, 1, 2], True, child)
    with pytest.raises(DesignError):
        FGrade(["x", "y"], [1, 1], True, child)


def test_fgrade_nan_treated_as_zero_and_counted():
    g = FGrade(["sqrt(x)", "1"], [1, 2], True,
               RectPrism((0, 0, 0), (10, 10, 10), 0))
    f = g.fractions((-2.0, 0, 0))  # sqrt(-2) is NaN -> clamps to 0
    assert f[1] == 0.0 and f[2] == 1.0
    assert g.programs[0].nan_events >= 1


def test_rigid_transform_invariance():
    rng = np.random.default_rng(9)
    node = Union([Sphere((2, 0, 0), 3, 0), RectPrism((-3, 1, 0), (4, 2, 6), 0)])
    m = translation((4, -2, 7)) @ rotation((0.3, 1, 0.2), 1.1)
    moved = Transform(m, node)
    pts = rng.uniform(-8, 8, (500, 3))
    world = pts @ m[:3, :3].T + m[:3, 3]
    assert np.max(np.abs(moved.sdf_many(world) - node.sdf_many(pts))) <= 1e-9


def test_uniform_scale_exact_nonuniform_conservative():
    s = Sphere((0, 0, 0), 2, 0)
    uni = Transform(scaling(3.0), s)
    assert uni.sdf((12, 0, 0)) == pytest.approx(6.0, abs=1e-12)

    stretched = Transform(scaling((4.0, 1.0, 1.0)), s)
    # surface is an ellipsoid with semi-axes (8, 2, 2); the conservative
    # estimate must never overstate the distance magnitude
    rng = np.random.default_rng(5)
    pts = rng.uniform(-10, 10, (400, 3))
    d = stretched.sdf_many(pts)
    inside_true = (pts[:, 0] / 8) ** 2 + (pts[:, 1] / 2) ** 2 + (pts[:, 2] / 2) ** 2 <= 1
    assert np.all((d <= 0) == inside_true)
    surf_dir = np.array([[8.0, 0, 0], [0, 2.0, 0]])
    for p in surf_dir:
        assert abs(stretched.sdf(p)) <= 1e-9


def test_singular_transform_rejected():
    m = np.eye(4)
    m[0, 0] = 0.0
    with pytest.raises(DesignError, match="not invertible"):
        Transform(m, Sphere((0, 0, 0), 1))


def test_smooth_union_blends_and_far_children_exact():
    a = Sphere((0, 0, 0), 5, 0)
    b = Sphere((30, 0, 0), 5, 0)
    smooth = Union([a, b], smooth=True)
    exact = Union([a, b])
    # away from the equidistant ridge the fields differ by more than the
    # 1 mm blend radius, so smoothing is inactive
    assert smooth.sdf((5, 0, 0)) == exact.sdf((5, 0, 0))
    assert smooth.sdf((26, 1, 0)) == exact.sdf((26, 1, 0))
    # near-equal fields blend below the exact min (the rounded crease)
    c = Sphere((9.5, 0, 0), 5, 0)
    smooth2 = Union([a, c], smooth=True)
    mid = (4.75, 0, 0)
    assert smooth2.sdf(mid) < Union([a, c]).sdf(mid)


def test_eval_error_carries_node_path():
    bad = FGrade(["q + 1", "1"], [1, 2], True, Sphere((0, 0, 0), 5, 0))
    tree = Union([Sphere((40, 0, 0), 1, 0), bad])
    with pytest.raises(EvalError) as err:
        tree.fractions((0, 0, 0))
    assert "children[1]" in str(err.value)
    assert "'q'" in str(err.value)


def test_fractions_many_agrees_with_single_point(graded_bar):
    bar, mats = graded_bar
    tree = Union([bar, Sphere((20, 0, 0), 4, mats.id("green"))])
    rng = np.random.default_rng(21)
    pts = rng.uniform([-8, -6, -3], [25, 6, 3], (300, 3))
    field = tree.fractions_many(pts)
    for i, p in enumerate(pts):
        single = tree.fractions_at(p)
        for mid in set(field) | set(single):
            bulk_v = float(field.get(mid, np.zeros(len(pts)))[i])
            assert bulk_v == pytest.approx(single.get(mid, 0.0), abs=1e-12)


def test_structural_equality():
    a = Union([Sphere((0, 0, 0), 1, 0), RectPrism((1, 1, 1), (2, 2, 2), 1)])
    b = Union([Sphere((0, 0, 0), 1, 0), RectPrism((1, 1, 1), (2, 2, 2), 1)])
    c = Union([Sphere((0, 0, 0), 1.5, 0), RectPrism((1, 1, 1), (2, 2, 2), 1)])
    assert a == b
    assert a != c


def test_material_table_invariants():
    mats = default_materials()
    assert mats.id("red") == 1
    with pytest.raises(DesignError):
        mats.id("plutonium")
    assert len({m.name for m in mats}) == len(mats)
    assert [m.id for m in mats] == list(range(len(mats)))
