import time

import numpy as np
import pytest

import vcadpy as pv
from vcadc import DesignError, EvalError


def test_constructor_arity_errors_at_call_time():
    with pytest.raises(DesignError):
        pv.FGrade(["x", "y"], [0, 1, 2], True, pv.Sphere(pv.Vec3(0, 0, 0), 1))
    with pytest.raises(DesignError):
        pv.Sphere(pv.Vec3(0, 0, 0), -1)
    with pytest.raises(DesignError):
        pv.RectPrism(pv.Vec3(0, 0, 0), (1, 2))
    with pytest.raises(DesignError):
        pv.Strut((0, 0, 0), (0, 0, 0), 1.0)
    with pytest.raises(DesignError):
        pv.GraphLattice("bcc", (5, 5, 5), 0.35)  # must be a LatticeType
    with pytest.raises(DesignError):
        pv.Intersection([pv.Sphere((0, 0, 0), 1)], False)  # flag comes first
    with pytest.raises(DesignError):
        pv.SimulationField("a.inp", "b.csv", ["x"], [0, 1])


def test_union_add_child_and_growth_rules():
    u = pv.Union()
    u.add_child(pv.Sphere(pv.Vec3(0, 0, 0), 2, 0))
    u.add_child(pv.Sphere(pv.Vec3(5, 0, 0), 2, 1))
    assert len(u.children) == 2
    assert u.sdf((0, 0, 0)) == -2.0
    with pytest.raises(DesignError):
        pv.Sphere(pv.Vec3(0, 0, 0), 1).add_child(u)


def test_materials_mirror_core_palette():
    mats = pv.default_materials()
    assert mats.id("red") == 1
    with pytest.raises(DesignError):
        mats.id("unobtainium")


def test_callback_expression_matches_string():
    base = pv.RectPrism(pv.Vec3(0, 0, 0), pv.Vec3(10, 10, 10), 0)
    with_callback = pv.FGrade([lambda p: 0.5, lambda p: 0.5], [1, 2], True, base)
    with_string = pv.FGrade(["0.5", "0.5"], [1, 2], True,
                            pv.RectPrism(pv.Vec3(0, 0, 0), pv.Vec3(10, 10, 10), 0))
    rng = np.random.default_rng(0)
    pts = rng.uniform(-5, 5, (50, 3))
    fa = with_callback.build().fractions_many(pts)
    fb = with_string.build().fractions_many(pts)
    for mid in fb:
        assert np.array_equal(fa[mid], fb[mid])


def test_callback_position_dependent():
    base = pv.RectPrism(pv.Vec3(0, 0, 0), pv.Vec3(10, 10, 10), 0)
    graded = pv.FGrade(
        [lambda p: p.x / 10 + 0.5, lambda p: -p.x / 10 + 0.5], [1, 2], True, base
    )
    f = graded.fractions((2.5, 0, 0))
    assert f[1] == pytest.approx(0.75)


def test_callback_error_surfaces_with_node_path():
    def boom(p):
        raise RuntimeError("bad field")

    tree = pv.Union([pv.FGrade([boom], [1], True, pv.Sphere(pv.Vec3(0, 0, 0), 5, 0))])
    with pytest.raises(EvalError) as err:
        tree.fractions((0, 0, 0))
    assert "bad field" in str(err.value)
    assert "children[0]" in str(err.value)


def test_callbacks_cannot_serialize():
    g = pv.FGrade([lambda p: 0.5], [0], True, pv.Sphere(pv.Vec3(0, 0, 0), 1, 0))
    with pytest.raises(DesignError, match="math strings"):
        g.to_json()


def test_string_expressions_outperform_callbacks():
    base = pv.RectPrism(pv.Vec3(0, 0, 0), pv.Vec3(10, 10, 10), 0)
    strings = pv.FGrade(["x/10+0.5", "-x/10+0.5"], [1, 2], True, base).build()
    callbacks = pv.FGrade(
        [lambda p: p.x / 10 + 0.5, lambda p: -p.x / 10 + 0.5], [1, 2], True,
        pv.RectPrism(pv.Vec3(0, 0, 0), pv.Vec3(10, 10, 10), 0),
    ).build()
    rng = np.random.default_rng(1)
    pts = rng.uniform(-5, 5, (20_000, 3))
    t0 = time.perf_counter()
    strings.fractions_many(pts)
    t_strings = time.perf_counter() - t0
    t0 = time.perf_counter()
    callbacks.fractions_many(pts)
    t_callbacks = time.perf_counter() - t0
    assert t_strings < t_callbacks  # direction only


def test_script_json_core_sdf_identity():
    # the JSON boundary introduces no numeric drift
    mats = pv.default_materials()
    handle = pv.Union(
        [
            pv.Sphere(pv.Vec3(0, 0, 0), 6, mats.id("red")),
            pv.Strut((0, 0, 0), (12, 0, 0), 1.5, mats.id("blue")),
        ]
    )
    import vcadc

    core = vcadc.Union(
        [
            vcadc.Sphere((0, 0, 0), 6, mats.id("red")),
            vcadc.Strut((0, 0, 0), (12, 0, 0), 1.5, mats.id("blue")),
        ]
    )
    rng = np.random.default_rng(5)
    pts = rng.uniform(-10, 15, (100, 3))
    assert np.array_equal(handle.build().sdf_many(pts), core.sdf_many(pts))
