"""Binary STL read/write (plus tolerant ASCII reading).

Output is always binary (80-byte header, little-endian triangle records)
with deterministic bytes for a fixed mesh.
"""

from __future__ import annotations

import struct

import numpy as np

_HEADER = b"vcadc binary stl" + b" " * 64
_RECORD = struct.Struct("<12fH")


def write_stl(path, vertices: np.ndarray, triangles: np.ndarray) -> None:
    vertices = np.asarray(vertices, dtype=np.float64)
    triangles = np.asarray(triangles, dtype=np.int64)
    tri = vertices[triangles]  # (T, 3, 3)
    n = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
    norms = np.linalg.norm(n, axis=1)
    n = np.where(norms[:, None] > 0, n / np.maximum(norms, 1e-300)[:, None], 0.0)
    recs = np.zeros((len(tri), 50), dtype=np.uint8)
    block = np.concatenate([n[:, None, :], tri], axis=1).astype("<f4")  # (T, 4, 3)
    recs[:, :48] = np.ascontiguousarray(block.reshape(len(tri), 12)).view(np.uint8)
    with open(path, "wb") as f:
        f.write(_HEADER[:80])
        f.write(struct.pack("<I", len(tri)))
        f.write(recs.tobytes())


def read_stl(path) -> tuple[np.ndarray, np.ndarray]:
    """Read an STL file; returns (vertices, triangles) with welded vertices."""
    with open(path, "rb") as f:
        data = f.read()
    if data[:5] == b"solid" and b"facet" in data[:512]:
        tris = _parse_ascii(data)
    else:
        count = struct.unpack_from("<I", data, 80)[0]
        raw = np.frombuffer(data, dtype=np.uint8, count=count * 50, offset=84)
        block = raw.reshape(count, 50)[:, :48].copy().view("<f4").reshape(count, 4, 3)
        tris = block[:, 1:, :].astype(np.float64)
    flat = tris.reshape(-1, 3)
    verts, inverse = np.unique(flat, axis=0, return_inverse=True)
    return verts, inverse.reshape(-1, 3).astype(np.int64)


def _parse_ascii(data: bytes) -> np.ndarray:
    coords = []
    for line in data.decode("ascii", errors="replace").splitlines():
        parts = line.split()
        if parts[:1] == ["vertex"]:
            coords.append([float(parts[1]), float(parts[2]), float(parts[3])])
    arr = np.array(coords, dtype=np.float64)
    if len(arr) % 3:
        raise ValueError("ascii stl vertex count is not a multiple of 3")
    return arr.reshape(-1, 3, 3)
