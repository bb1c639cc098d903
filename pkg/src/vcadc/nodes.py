"""The implicit design graph.

Every node answers two queries at any point in space: a signed distance
(negative inside, millimeters) and a set of material volume fractions.
Composite nodes combine children with CSG rules, affine transforms,
periodic tiling, and expression-driven material grading.

Nodes are immutable after construction and queries are pure, so a built
tree is safe for unlimited concurrent readers. The bulk entry points
(``sdf_many`` / ``fractions_many``) take (N, 3) arrays and are the fast
path used by all compilers; single-point ``sdf`` / ``fractions`` are
convenience wrappers. In bulk fraction fields a zero entry and an absent
material are equivalent; the single-point API preserves explicitly listed
zero fractions (e.g. the far end of a gradient).
"""

from __future__ import annotations

import numpy as np

from .errors import DesignError, EvalError, UnboundedDesignError
from .expr import ExprProgram, parse
from .geom import BBox, Vec3, as_points, as_vec3
from .materials import FractionSet

# Fixed blend radius for smooth boolean modes, in mm.
SMOOTH_K_MM = 1.0


class DesignNode:
    kind = "node"
    children: tuple["DesignNode", ...] = ()

    # True when the field never drops below the distance to the node's
    # bounding box minus the box half-extent. Exact-distance primitives
    # qualify; max-composed fields (intersection, difference) and
    # saturating grid fields do not, and must never be box-pruned.
    sdf_is_metric = False

    # -- geometry -----------------------------------------------------------

    def sdf_many(self, pts: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def sdf(self, p) -> float:
        return float(self.sdf_many(as_vec3(p).reshape(1, 3))[0])

    def bounds(self) -> BBox:
        raise NotImplementedError

    # -- materials ----------------------------------------------------------

    def fractions_many(self, pts: np.ndarray) -> dict[int, np.ndarray]:
        """Bulk fraction field, one array per material id. No exterior mask."""
        raise NotImplementedError

    def fractions_at(self, p: np.ndarray) -> FractionSet:
        """Raw single-point fractions (no exterior mask)."""
        raise NotImplementedError

    def fractions(self, p) -> FractionSet:
        """Fractions at ``p``; empty for exterior points (sdf > 0)."""
        p = as_vec3(p)
        if self.sdf(p) > 0.0:
            return FractionSet()
        return self.fractions_at(p)

    # -- bookkeeping ---------------------------------------------------------

    def _params(self) -> tuple:
        return ()

    def structure(self) -> tuple:
        """Hashable structural identity used for equality and round-trip tests."""
        return (self.kind, self._params(), tuple(c.structure() for c in self.children))

    def __eq__(self, other) -> bool:
        return isinstance(other, DesignNode) and self.structure() == other.structure()

    def __hash__(self):
        return hash(self.structure())

    def __repr__(self) -> str:
        return f"{type(self).__name__}({', '.join(repr(p) for p in self._params())})"


def _try_bounds(node: DesignNode) -> BBox | None:
    try:
        return node.bounds()
    except UnboundedDesignError:
        return None


def _bbox_distance(bbox: BBox, pts: np.ndarray) -> np.ndarray:
    """Distance from points to an AABB; 0 inside. A lower bound on any sdf
    whose shape the box encloses, valid for points outside the box."""
    d = np.maximum(bbox.min - pts, pts - bbox.max)
    return np.linalg.norm(np.maximum(d, 0.0), axis=1)


def _wrap_eval_error(segment: str):
    """Decorator-ish helper: re-raise EvalError with a node-path segment."""

    class _Ctx:
        def __enter__(self):
            return self

        def __exit__(self, exc_type, exc, tb):
            if exc_type is not None and issubclass(exc_type, EvalError):
                raise exc.with_path(segment) from None
            return False

    return _Ctx()


# ---------------------------------------------------------------------------
# Leaves


class Sphere(DesignNode):
    kind = "sphere"
    sdf_is_metric = True

    def __init__(self, center, radius: float, material: int | None = None):
        self.center = as_vec3(center)
        self.radius = float(radius)
        if self.radius <= 0:
            raise DesignError(f"sphere radius must be > 0, got {radius}")
        self.material = None if material is None else int(material)

    def sdf_many(self, pts):
        return np.linalg.norm(pts - self.center, axis=1) - self.radius

    def bounds(self):
        return BBox(self.center - self.radius, self.center + self.radius)

    def fractions_many(self, pts):
        if self.material is None:
            return {}
        return {self.material: np.ones(len(pts))}

    def fractions_at(self, p):
        return FractionSet() if self.material is None else FractionSet({self.material: 1.0})

    def _params(self):
        return (tuple(self.center), self.radius, self.material)


class RectPrism(DesignNode):
    kind = "rect_prism"
    sdf_is_metric = True

    def __init__(self, center, dims, material: int | None = None):
        self.center = as_vec3(center)
        self.dims = as_vec3(dims)
        if np.any(self.dims <= 0):
            raise DesignError(f"rect prism dims must be > 0, got {dims}")
        self.material = None if material is None else int(material)

    def sdf_many(self, pts):
        q = np.abs(pts - self.center) - 0.5 * self.dims
        outside = np.linalg.norm(np.maximum(q, 0.0), axis=1)
        inside = np.minimum(np.max(q, axis=1), 0.0)
        return outside + inside

    def bounds(self):
        half = 0.5 * self.dims
        return BBox(self.center - half, self.center + half)

    def fractions_many(self, pts):
        if self.material is None:
            return {}
        return {self.material: np.ones(len(pts))}

    def fractions_at(self, p):
        return FractionSet() if self.material is None else FractionSet({self.material: 1.0})

    def _params(self):
        return (tuple(self.center), tuple(self.dims), self.material)


# ---------------------------------------------------------------------------
# Booleans


def _smooth_min(a, b, k=SMOOTH_K_MM):
    h = np.maximum(k - np.abs(a - b), 0.0) / k
    return np.minimum(a, b) - h * h * k * 0.25


def _smooth_max(a, b, k=SMOOTH_K_MM):
    return -_smooth_min(-a, -b, k)


class Union(DesignNode):
    """min over children. Material comes from the child with the smallest
    signed distance (ties: lowest child index). ``smooth`` enables quadratic
    polynomial blending with a fixed 1 mm radius."""

    kind = "union"

    def __init__(self, children, smooth: bool = False):
        children = tuple(children)
        if not children:
            raise DesignError("union requires at least one child")
        self.children = children
        self.smooth = bool(smooth)
        self._child_boxes = [
            _try_bounds(c) if c.sdf_is_metric else None for c in children
        ]
        self.sdf_is_metric = all(c.sdf_is_metric for c in children)

    def _scan(self, pts):
        """Exact min distance and winning child index, with bbox pruning.

        Only children with metric fields are pruned; skipping one whose
        lower bound exceeds best (+ blend radius in smooth mode) is exact,
        since it could change neither the min nor the smooth fold (the
        blend kernel vanishes beyond k).
        """
        n = len(pts)
        best = np.full(n, np.inf)
        winner = np.full(n, -1, dtype=np.intp)
        margin = SMOOTH_K_MM if self.smooth else 0.0
        smooth_val = np.full(n, np.inf) if self.smooth else None
        for i, child in enumerate(self.children):
            box = self._child_boxes[i]
            if box is not None:
                # box distance minus the deepest possible interior depth is a
                # true lower bound on a metric child's sdf even inside the box
                depth_cap = 0.5 * float(np.min(box.size))
                mask = _bbox_distance(box, pts) - depth_cap < best + margin
                if not mask.any():
                    continue
            else:
                mask = np.ones(n, dtype=bool)
            with _wrap_eval_error(f"{self.kind}.children[{i}]"):
                d = child.sdf_many(pts[mask])
            win = d < best[mask]
            w = winner[mask]
            w[win] = i
            winner[mask] = w
            best[mask] = np.minimum(best[mask], d)
            if self.smooth:
                prev = smooth_val[mask]
                smooth_val[mask] = np.where(np.isfinite(prev), _smooth_min(prev, d), d)
        return (smooth_val if self.smooth else best), best, winner

    def sdf_many(self, pts):
        combined, _, _ = self._scan(pts)
        return combined

    def fractions_many(self, pts):
        _, _, winner = self._scan(pts)
        out: dict[int, np.ndarray] = {}
        n = len(pts)
        for i, child in enumerate(self.children):
            rows = np.nonzero(winner == i)[0]
            if rows.size == 0:
                continue
            with _wrap_eval_error(f"{self.kind}.children[{i}]"):
                sub = child.fractions_many(pts[rows])
            for mid, vals in sub.items():
                if mid not in out:
                    out[mid] = np.zeros(n)
                out[mid][rows] = vals
        return out

    def fractions_at(self, p):
        p = as_vec3(p)
        dists = [c.sdf(p) for c in self.children]
        i = int(np.argmin(dists))
        with _wrap_eval_error(f"{self.kind}.children[{i}]"):
            return self.children[i].fractions_at(p)

    def bounds(self):
        boxes = []
        for i, c in enumerate(self.children):
            b = _try_bounds(c)
            if b is None:
                raise UnboundedDesignError(f"union child {i} is unbounded")
            boxes.append(b)
        out = boxes[0]
        for b in boxes[1:]:
            out = out.union(b)
        if self.smooth:
            out = out.expanded(SMOOTH_K_MM * 0.25)
        return out

    def _params(self):
        return (self.smooth,)


class Intersection(DesignNode):
    """max over children. Material comes from the child with the largest
    signed distance (the active constraint) among children that carry
    materials; ties break to the lowest index."""

    kind = "intersection"

    def __init__(self, children, smooth: bool = False):
        children = tuple(children)
        if not children:
            raise DesignError("intersection requires at least one child")
        self.children = children
        self.smooth = bool(smooth)
        self._child_boxes = [_try_bounds(c) for c in children]

    def _child_sdfs(self, pts):
        rows = []
        for i, child in enumerate(self.children):
            with _wrap_eval_error(f"{self.kind}.children[{i}]"):
                rows.append(child.sdf_many(pts))
        return np.stack(rows)

    def sdf_many(self, pts):
        d = self._child_sdfs(pts)
        if not self.smooth:
            return np.max(d, axis=0)
        out = d[0]
        for row in d[1:]:
            out = _smooth_max(out, row)
        return out

    def fractions_many(self, pts):
        d = self._child_sdfs(pts)
        n = len(pts)
        order = np.argsort(-d, axis=0, kind="stable")
        filled = np.zeros(n, dtype=bool)
        out: dict[int, np.ndarray] = {}
        for rank in range(len(self.children)):
            pick = order[rank]
            for i, child in enumerate(self.children):
                rows = np.nonzero((~filled) & (pick == i))[0]
                if rows.size == 0:
                    continue
                with _wrap_eval_error(f"{self.kind}.children[{i}]"):
                    sub = child.fractions_many(pts[rows])
                if not sub:
                    continue
                nonzero = np.zeros(rows.size, dtype=bool)
                for vals in sub.values():
                    nonzero |= vals > 0
                hit = rows[nonzero]
                if hit.size == 0:
                    continue
                for mid, vals in sub.items():
                    if mid not in out:
                        out[mid] = np.zeros(n)
                    out[mid][hit] = vals[nonzero]
                filled[hit] = True
            if filled.all():
                break
        return out

    def fractions_at(self, p):
        p = as_vec3(p)
        dists = [c.sdf(p) for c in self.children]
        for i in sorted(range(len(dists)), key=lambda i: (-dists[i], i)):
            with _wrap_eval_error(f"{self.kind}.children[{i}]"):
                f = self.children[i].fractions_at(p)
            if not f.empty:
                return f
        return FractionSet()

    def bounds(self):
        boxes = [b for b in self._child_boxes if b is not None]
        if not boxes:
            raise UnboundedDesignError("intersection of unbounded children")
        out = boxes[0]
        for b in boxes[1:]:
            out = out.intersection(b)
        return out

    def _params(self):
        return (self.smooth,)


class Difference(DesignNode):
    """a minus b: max(d_a, -d_b). Material distribution is a's."""

    kind = "difference"

    def __init__(self, a: DesignNode, b: DesignNode):
        self.children = (a, b)

    def sdf_many(self, pts):
        a, b = self.children
        with _wrap_eval_error(f"{self.kind}.children[0]"):
            da = a.sdf_many(pts)
        with _wrap_eval_error(f"{self.kind}.children[1]"):
            db = b.sdf_many(pts)
        return np.maximum(da, -db)

    def fractions_many(self, pts):
        with _wrap_eval_error(f"{self.kind}.children[0]"):
            return self.children[0].fractions_many(pts)

    def fractions_at(self, p):
        with _wrap_eval_error(f"{self.kind}.children[0]"):
            return self.children[0].fractions_at(p)

    def bounds(self):
        return self.children[0].bounds()


# ---------------------------------------------------------------------------
# Transform / Tile / FGrade


class Transform(DesignNode):
    """Affine 4x4 transform of a child.

    The child is evaluated at A^-1 p and the distance rescaled by the
    smallest singular value of the linear part. For rigid and uniformly
    scaled transforms this is the exact distance; under non-uniform scale
    it is a conservative lower bound on the true distance.
    """

    kind = "transform"

    def __init__(self, matrix, child: DesignNode):
        m = np.asarray(matrix, dtype=np.float64)
        if m.shape != (4, 4):
            raise DesignError(f"transform matrix must be 4x4, got {m.shape}")
        if not np.allclose(m[3], (0.0, 0.0, 0.0, 1.0)):
            raise DesignError("transform matrix last row must be [0, 0, 0, 1]")
        try:
            inv = np.linalg.inv(m)
        except np.linalg.LinAlgError:
            raise DesignError("transform matrix is not invertible") from None
        self.matrix = m
        self._inv = inv
        sv = np.linalg.svd(m[:3, :3], compute_uv=False)
        self._scale = float(sv[-1])
        self.children = (child,)
        uniform = sv[0] - sv[-1] <= 1e-12 * sv[0]
        self.sdf_is_metric = bool(uniform and child.sdf_is_metric)

    @classmethod
    def translate(cls, offset, child: DesignNode) -> "Transform":
        from .geom import translation

        return cls(translation(offset), child)

    def _to_local(self, pts):
        return pts @ self._inv[:3, :3].T + self._inv[:3, 3]

    def sdf_many(self, pts):
        with _wrap_eval_error(self.kind):
            return self.children[0].sdf_many(self._to_local(pts)) * self._scale

    def fractions_many(self, pts):
        with _wrap_eval_error(self.kind):
            return self.children[0].fractions_many(self._to_local(pts))

    def fractions_at(self, p):
        q = self._to_local(as_vec3(p).reshape(1, 3))[0]
        with _wrap_eval_error(self.kind):
            return self.children[0].fractions_at(q)

    def bounds(self):
        corners = self.children[0].bounds().corners()
        world = corners @ self.matrix[:3, :3].T + self.matrix[:3, 3]
        return BBox(world.min(axis=0), world.max(axis=0))

    def _params(self):
        return (tuple(map(tuple, self.matrix)),)


class Tile(DesignNode):
    """Infinite periodic repetition of the child.

    Points are wrapped into the period cell centered at the origin before
    querying the child, which repeats both geometry and materials. The
    period defaults to the child's bounding-box dimensions.
    """

    kind = "tile"

    def __init__(self, child: DesignNode, period=None):
        if period is None:
            period = child.bounds().size
        self.period = as_vec3(period)
        if np.any(self.period <= 0):
            raise DesignError(f"tile period components must be > 0, got {period}")
        self.children = (child,)

    def _wrap(self, pts):
        return pts - self.period * np.round(pts / self.period)

    def sdf_many(self, pts):
        with _wrap_eval_error(self.kind):
            return self.children[0].sdf_many(self._wrap(pts))

    def fractions_many(self, pts):
        with _wrap_eval_error(self.kind):
            return self.children[0].fractions_many(self._wrap(pts))

    def fractions_at(self, p):
        q = self._wrap(as_vec3(p).reshape(1, 3))[0]
        with _wrap_eval_error(self.kind):
            return self.children[0].fractions_at(q)

    def bounds(self):
        raise UnboundedDesignError(
            "tile extends indefinitely; intersect it with a bounded region"
        )

    def _params(self):
        return (tuple(self.period),)


class _CallbackExpr:
    """Adapter putting a host-language callable behind the ExprProgram API.

    The callable receives one Vec3 per sample point; evaluation is a Python
    loop, so math strings are strongly preferred for production sampling.
    """

    __slots__ = ("fn", "variables", "nan_events")

    def __init__(self, fn):
        self.fn = fn
        self.variables = frozenset(("x", "y", "z"))
        self.nan_events = 0

    def eval(self, bindings):
        x = np.atleast_1d(np.asarray(bindings["x"], dtype=np.float64))
        y = np.atleast_1d(np.asarray(bindings["y"], dtype=np.float64))
        z = np.atleast_1d(np.asarray(bindings["z"], dtype=np.float64))
        out = np.empty(len(x))
        for i in range(len(x)):
            try:
                out[i] = float(self.fn(Vec3(float(x[i]), float(y[i]), float(z[i]))))
            except EvalError:
                raise
            except Exception as e:  # surface user-callback failures with context
                raise EvalError(f"callback raised {type(e).__name__}: {e}") from e
        return out

    def pretty(self):
        return f"<callback {getattr(self.fn, '__name__', 'fn')}>"


def compile_expressions(expressions) -> list:
    """Compile a mixed list of source strings / programs / callables."""
    out = []
    for e in expressions:
        if isinstance(e, (ExprProgram, _CallbackExpr)):
            out.append(e)
        elif isinstance(e, str):
            out.append(parse(e))
        elif callable(e):
            out.append(_CallbackExpr(e))
        else:
            raise DesignError(f"expression must be a string or callable, got {type(e).__name__}")
    return out


def eval_fraction_field(programs, materials, bindings, n: int) -> tuple[dict[int, np.ndarray], np.ndarray]:
    """Evaluate fraction expressions, clamp to [0,1], and renormalize.

    Returns (field, covered) where ``covered`` marks rows whose expressions
    summed to something positive. NaN results count as 0 and bump the
    program's ``nan_events`` counter.
    """
    vals = np.empty((len(programs), n))
    for k, prog in enumerate(programs):
        v = np.asarray(prog.eval(bindings), dtype=np.float64)
        v = np.broadcast_to(v, (n,)).copy() if v.ndim == 0 else v
        bad = np.isnan(v)
        if bad.any():
            prog.nan_events += int(bad.sum())
            v[bad] = 0.0
        vals[k] = np.clip(v, 0.0, 1.0)
    total = vals.sum(axis=0)
    covered = total > 0.0
    scale = np.where(covered, total, 1.0)
    vals /= scale
    field = {mid: vals[k] for k, mid in enumerate(materials)}
    return field, covered


class FGrade(DesignNode):
    """Functional grading: override the child's materials with expression-
    driven volume fractions.

    Expressions are evaluated in the node's local frame (gradients move
    with the object under transforms), clamped to [0,1] and renormalized to
    sum 1. Where every expression is zero the child's own fractions show
    through. The ``probabilistic`` flag records the designer's intended
    realization (dither vs threshold); compilers may override it per job.
    """

    kind = "fgrade"

    def __init__(self, expressions, materials, probabilistic: bool, child: DesignNode):
        self.programs = compile_expressions(expressions)
        self.materials = tuple(int(m) for m in materials)
        if len(self.programs) != len(self.materials):
            raise DesignError(
                f"fgrade needs one expression per material: "
                f"{len(self.programs)} expressions vs {len(self.materials)} materials"
            )
        if len(set(self.materials)) != len(self.materials):
            raise DesignError("fgrade material ids must be distinct")
        self.probabilistic = bool(probabilistic)
        self.children = (child,)
        self.sdf_is_metric = child.sdf_is_metric

    def sdf_many(self, pts):
        with _wrap_eval_error(self.kind):
            return self.children[0].sdf_many(pts)

    def _field(self, pts):
        bindings = {"x": pts[:, 0], "y": pts[:, 1], "z": pts[:, 2]}
        with _wrap_eval_error(self.kind):
            return eval_fraction_field(self.programs, self.materials, bindings, len(pts))

    def fractions_many(self, pts):
        field, covered = self._field(pts)
        if covered.all():
            return field
        rows = np.nonzero(~covered)[0]
        with _wrap_eval_error(f"{self.kind}.children[0]"):
            fallback = self.children[0].fractions_many(pts[rows])
        for mid, vals in fallback.items():
            if mid not in field:
                field[mid] = np.zeros(len(pts))
            field[mid][rows] = vals
        return field

    def fractions_at(self, p):
        p = as_vec3(p)
        field, covered = self._field(p.reshape(1, 3))
        if covered[0]:
            return FractionSet({mid: float(field[mid][0]) for mid in self.materials})
        with _wrap_eval_error(f"{self.kind}.children[0]"):
            return self.children[0].fractions_at(p)

    def bounds(self):
        return self.children[0].bounds()

    def serializable(self) -> bool:
        return all(isinstance(p, ExprProgram) for p in self.programs)

    def _params(self):
        srcs = tuple(p.source if isinstance(p, ExprProgram) else p.pretty() for p in self.programs)
        return (srcs, self.materials, self.probabilistic)
