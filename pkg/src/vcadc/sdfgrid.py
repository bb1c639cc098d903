"""Narrow-band signed-distance grids built from triangle surfaces.

The grid stores exact distances only inside a band of +/- ``band_cells``
cells around the surface; everywhere else only an int8 sign survives and
queries saturate at the band width. Trilinear interpolation keeps samples
continuous. Sign near the surface comes from the nearest triangle's
normal, with a generalized winding-number fallback where that is
ambiguous; far cells are classified by flood fill from the grid boundary,
which assumes a closed (watertight) input surface.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from .geom import BBox


def point_triangle_dist2(p: np.ndarray, a, b, c) -> tuple[np.ndarray, np.ndarray]:
    """Squared distance and closest point from points ``p`` (N,3) to one triangle."""
    ab = b - a
    ac = c - a
    ap = p - a
    d1 = ap @ ab
    d2 = ap @ ac
    bp = p - b
    d3 = bp @ ab
    d4 = bp @ ac
    cp = p - c
    d5 = cp @ ab
    d6 = cp @ ac

    closest = np.empty_like(p)
    done = np.zeros(len(p), dtype=bool)

    # Vertex regions.
    m = (d1 <= 0) & (d2 <= 0)
    closest[m & ~done] = a
    done |= m
    m = (d3 >= 0) & (d4 <= d3)
    closest[m & ~done] = b
    done |= m
    m = (d6 >= 0) & (d5 <= d6)
    closest[m & ~done] = c
    done |= m
    # Edge ab.
    vc = d1 * d4 - d3 * d2
    m = (vc <= 0) & (d1 >= 0) & (d3 <= 0) & ~done
    t = np.where(d1 - d3 != 0, d1 / np.where(d1 - d3 != 0, d1 - d3, 1.0), 0.0)
    closest[m] = a + t[m, None] * ab
    done |= m
    # Edge ac.
    vb = d5 * d2 - d1 * d6
    m = (vb <= 0) & (d2 >= 0) & (d6 <= 0) & ~done
    t = np.where(d2 - d6 != 0, d2 / np.where(d2 - d6 != 0, d2 - d6, 1.0), 0.0)
    closest[m] = a + t[m, None] * ac
    done |= m
    # Edge bc.
    va = d3 * d6 - d5 * d4
    m = (va <= 0) & (d4 - d3 >= 0) & (d5 - d6 >= 0) & ~done
    denom = (d4 - d3) + (d5 - d6)
    t = np.where(denom != 0, (d4 - d3) / np.where(denom != 0, denom, 1.0), 0.0)
    closest[m] = b + t[m, None] * (c - b)
    done |= m
    # Interior.
    m = ~done
    denom = va + vb + vc
    denom = np.where(denom != 0, denom, 1.0)
    v = vb / denom
    w = vc / denom
    closest[m] = a + v[m, None] * ab + w[m, None] * ac
    d = p - closest
    return np.einsum("nd,nd->n", d, d), closest


def winding_number(pts: np.ndarray, vertices: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    """Generalized winding number (solid angle sum / 4pi) at each point."""
    total = np.zeros(len(pts))
    chunk = max(1, int(2e6 // max(len(pts), 1)))
    for s in range(0, len(triangles), chunk):
        tri = vertices[triangles[s : s + chunk]]  # (K,3,3)
        a = tri[None, :, 0, :] - pts[:, None, :]
        b = tri[None, :, 1, :] - pts[:, None, :]
        c = tri[None, :, 2, :] - pts[:, None, :]
        la = np.linalg.norm(a, axis=2)
        lb = np.linalg.norm(b, axis=2)
        lc = np.linalg.norm(c, axis=2)
        num = np.einsum("nkd,nkd->nk", a, np.cross(b, c))
        den = (
            la * lb * lc
            + np.einsum("nkd,nkd->nk", a, b) * lc
            + np.einsum("nkd,nkd->nk", b, c) * la
            + np.einsum("nkd,nkd->nk", c, a) * lb
        )
        total += np.arctan2(num, den).sum(axis=1)
    return total / (2.0 * np.pi)


class NarrowBandGrid:
    """Signed distance of a triangle surface on a sparse coarse grid."""

    def __init__(self, vertices, triangles, cell: float = 0.1, band_cells: int = 3):
        vertices = np.asarray(vertices, dtype=np.float64)
        triangles = np.asarray(triangles, dtype=np.int64)
        if len(triangles) == 0:
            raise ValueError("surface has no triangles")
        self.cell = float(cell)
        self.band_width = band_cells * self.cell
        self.surface_bounds = BBox(vertices.min(axis=0), vertices.max(axis=0))

        pad = (band_cells + 2) * self.cell
        self.origin = vertices.min(axis=0) - pad
        span = vertices.max(axis=0) + pad - self.origin
        self.shape = tuple(int(np.ceil(s / self.cell)) + 1 for s in span)
        nx, ny, nz = self.shape

        dist2 = np.full(nx * ny * nz, np.inf, dtype=np.float64)
        nearest = np.full(nx * ny * nz, -1, dtype=np.int64)
        reach = self.band_width + self.cell  # resolve distances slightly past the band

        tri_pts = vertices[triangles]
        tnormals = np.cross(tri_pts[:, 1] - tri_pts[:, 0], tri_pts[:, 2] - tri_pts[:, 0])
        node_cache: dict[tuple, np.ndarray] = {}
        for t in range(len(triangles)):
            a, b, c = tri_pts[t]
            lo = np.floor((np.minimum(np.minimum(a, b), c) - reach - self.origin) / self.cell)
            hi = np.ceil((np.maximum(np.maximum(a, b), c) + reach - self.origin) / self.cell)
            lo = np.maximum(lo, 0).astype(int)
            hi = np.minimum(hi, np.array(self.shape) - 1).astype(int)
            key = (*lo, *hi)
            flat = node_cache.get(key)
            if flat is None:
                ii, jj, kk = np.meshgrid(
                    np.arange(lo[0], hi[0] + 1),
                    np.arange(lo[1], hi[1] + 1),
                    np.arange(lo[2], hi[2] + 1),
                    indexing="ij",
                )
                flat = ((ii * ny + jj) * nz + kk).ravel()
                if len(node_cache) > 64:
                    node_cache.clear()
                node_cache[key] = flat
            pts = self._node_positions(flat)
            d2, _ = point_triangle_dist2(pts, a, b, c)
            better = d2 < dist2[flat]
            dist2[flat[better]] = d2[better]
            nearest[flat[better]] = t

        dist = np.sqrt(dist2, out=dist2)
        band = dist <= self.band_width

        # Far-field sign: flood fill the complement of a one-cell shell.
        blocked = (dist <= self.cell * 1.0001).reshape(self.shape)
        labels, _ = ndimage.label(~blocked, structure=ndimage.generate_binary_structure(3, 1))
        edge_labels = np.unique(
            np.concatenate(
                [
                    labels[0].ravel(), labels[-1].ravel(),
                    labels[:, 0].ravel(), labels[:, -1].ravel(),
                    labels[:, :, 0].ravel(), labels[:, :, -1].ravel(),
                ]
            )
        )
        outside = np.isin(labels, edge_labels[edge_labels > 0]).ravel()
        sign = np.where(outside, np.int8(1), np.int8(-1))

        # Near-surface sign from the nearest triangle's normal; fall back to
        # the winding number where the projection is too shallow to trust.
        near = np.nonzero(blocked.ravel())[0]
        if near.size:
            pts = self._node_positions(near)
            tris = nearest[near]
            _, cp = point_triangle_dist2_multi(pts, tri_pts, tris)
            away = pts - cp
            proj = np.einsum("nd,nd->n", away, tnormals[tris])
            norm_prod = np.linalg.norm(away, axis=1) * np.linalg.norm(tnormals[tris], axis=1)
            confident = np.abs(proj) > 0.2 * np.maximum(norm_prod, 1e-300)
            s = np.where(proj >= 0, np.int8(1), np.int8(-1))
            fuzzy = ~confident
            if fuzzy.any():
                w = winding_number(pts[fuzzy], vertices, triangles)
                s[fuzzy] = np.where(w > 0.5, np.int8(-1), np.int8(1))
            sign[near] = s

        self.sign = sign.astype(np.int8)
        band_idx = np.nonzero(band)[0]
        self.band_idx = band_idx
        self.band_vals = (
            np.minimum(dist[band_idx], self.band_width) * self.sign[band_idx]
        ).astype(np.float32)

    def _node_positions(self, flat: np.ndarray) -> np.ndarray:
        ny, nz = self.shape[1], self.shape[2]
        k = flat % nz
        j = (flat // nz) % ny
        i = flat // (ny * nz)
        return self.origin + np.stack([i, j, k], axis=1) * self.cell

    def _node_values(self, flat: np.ndarray) -> np.ndarray:
        far = self.sign[flat].astype(np.float64) * self.band_width
        if len(self.band_idx) == 0:
            return far
        pos = np.minimum(np.searchsorted(self.band_idx, flat), len(self.band_idx) - 1)
        hit = self.band_idx[pos] == flat
        return np.where(hit, self.band_vals[pos].astype(np.float64), far)

    def sample(self, pts: np.ndarray) -> np.ndarray:
        """Trilinear signed distance; saturates at +/- band width far away."""
        nx, ny, nz = self.shape
        u = (np.asarray(pts, dtype=np.float64) - self.origin) / self.cell
        u = np.clip(u, 0.0, np.array(self.shape, dtype=np.float64) - 1.0 - 1e-9)
        i0 = np.floor(u).astype(np.int64)
        f = u - i0
        out = np.zeros(len(u))
        for di in (0, 1):
            wi = (1 - f[:, 0]) if di == 0 else f[:, 0]
            for dj in (0, 1):
                wj = (1 - f[:, 1]) if dj == 0 else f[:, 1]
                for dk in (0, 1):
                    wk = (1 - f[:, 2]) if dk == 0 else f[:, 2]
                    flat = ((i0[:, 0] + di) * ny + (i0[:, 1] + dj)) * nz + (i0[:, 2] + dk)
                    out += wi * wj * wk * self._node_values(flat)
        return out


def point_triangle_dist2_multi(
    pts: np.ndarray, tri_pts: np.ndarray, tri_ids: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Distance from each point to its own assigned triangle."""
    d2 = np.empty(len(pts))
    cp = np.empty_like(pts)
    for t in np.unique(tri_ids):
        rows = np.nonzero(tri_ids == t)[0]
        a, b, c = tri_pts[t]
        d2[rows], cp[rows] = point_triangle_dist2(pts[rows], a, b, c)
    return d2, cp
