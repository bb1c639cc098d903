"""Counter-based hashing for reproducible parallel sampling.

Material dithering must give bit-identical output no matter how work is
split across workers, so instead of a sequential RNG every draw is a pure
function of (voxel coordinate, seed). The mixer is two rounds of the
splitmix64 finalizer, which is plenty to pass binomial frequency tests.
"""

from __future__ import annotations

import numpy as np

_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV53 = 1.0 / float(1 << 53)


def _mix64(z: np.ndarray) -> np.ndarray:
    # uint64 arithmetic is modular by design; silence the scalar-overflow warning
    with np.errstate(over="ignore"):
        z = (z ^ (z >> _S30)) * _M1
        z = (z ^ (z >> _S27)) * _M2
        return z ^ (z >> _S31)


def uniform_from_coords(ix, iy, iz, seed: int) -> np.ndarray:
    """u in [0, 1) per voxel coordinate, independent of evaluation order.

    Coordinates must fit in 21 bits each (grids up to ~2M voxels per axis).
    """
    ix = np.asarray(ix, dtype=np.uint64)
    iy = np.asarray(iy, dtype=np.uint64)
    iz = np.asarray(iz, dtype=np.uint64)
    key = ix | (iy << np.uint64(21)) | (iz << np.uint64(42))
    with np.errstate(over="ignore"):
        h = _mix64(_mix64(key + _GOLDEN) ^ _mix64(np.uint64(seed & 0xFFFFFFFFFFFFFFFF)))
    return np.asarray((h >> _S11).astype(np.float64) * _INV53)


def uniform_from_index(idx, seed: int) -> np.ndarray:
    """u in [0, 1) per linear counter (used for per-element material draws)."""
    idx = np.asarray(idx, dtype=np.uint64)
    with np.errstate(over="ignore"):
        h = _mix64(_mix64(idx + _GOLDEN) ^ _mix64(np.uint64(seed & 0xFFFFFFFFFFFFFFFF)))
    return np.asarray((h >> _S11).astype(np.float64) * _INV53)
